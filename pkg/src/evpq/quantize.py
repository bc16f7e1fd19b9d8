"""Quantisers mapping float vectors to ternary or binary codes.

* :func:`evp_quantize` - nearest vertex of the {x,d} EVP, the polytope whose
  vertices are all ternary vectors with exactly ``x`` nonzeros.
* :func:`one_bit_quantize` - sign bits, compared by Hamming distance.
* :func:`b158_quantize` - BitNet b1.58 style absmean rounding. BitNet computes
  the scale over a whole weight matrix; here it is computed per vector.

All quantisers accept a single vector ``(d,)`` or a batch ``(n, d)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitcode import PackedBinary, PackedTernary, pack, pack_bits
from .vecstore import Dataset

QUANTIZERS = ("evp", "one-bit", "b158", "identity")
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class EvpConfig:
    d: int
    x: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not 1 <= self.x <= self.d:
            raise ValueError(f"x must satisfy 1 <= x <= d={self.d}, got {self.x}")

    @classmethod
    def for_dim(cls, d: int) -> "EvpConfig":
        return cls(d, select_x(d))


@dataclass(frozen=True)
class B158Config:
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def select_x(d: int) -> int:
    """Nonzero count maximising the EVP vertex count: round(2d/3).

    2d/3 is never exactly half-way between integers, so no tie rule is needed.
    """
    if d < 2:
        raise ValueError(f"select_x needs d >= 2, got {d}")
    return (4 * d + 3) // 6


def log10_vertex_count(cfg: EvpConfig) -> float:
    """log10 of C(d, x) * 2**x."""
    d, x = cfg.d, cfg.x
    log_binom = math.lgamma(d + 1) - math.lgamma(x + 1) - math.lgamma(d - x + 1)
    return log_binom / math.log(10) + x * math.log10(2)


def _as_2d(u):
    u = np.asarray(u)
    if u.ndim not in (1, 2):
        raise ValueError(f"expected a vector or a 2-D batch, got shape {u.shape}")
    return u.reshape(1, -1) if u.ndim == 1 else u, u.ndim == 1


def evp_quantize(u, cfg: EvpConfig) -> np.ndarray:
    """Map ``u`` to its nearest {x,d} EVP vertex as an int8 ternary array.

    The ``x`` coordinates of largest magnitude keep their sign, the rest
    become 0. Equal magnitudes are taken in index order; a selected
    coordinate that is exactly zero stays 0.
    """
    u2, single = _as_2d(u)
    if u2.shape[1] != cfg.d:
        raise ValueError(f"dimension mismatch: vector has {u2.shape[1]} elements, config d={cfg.d}")
    u2 = u2.astype(np.float64, copy=False)
    top = np.argsort(-np.abs(u2), axis=1, kind="stable")[:, : cfg.x]
    rows = np.arange(u2.shape[0])[:, None]
    out = np.zeros(u2.shape, dtype=np.int8)
    out[rows, top] = np.sign(u2[rows, top])
    return out[0] if single else out


def one_bit_quantize(u) -> PackedBinary:
    """Pack the sign pattern of ``u``: bit i is set iff u_i > 0."""
    u2, single = _as_2d(u)
    if u2.shape[1] == 0:
        raise ValueError("cannot quantise an empty vector")
    bits = pack_bits(u2 > 0)
    return bits[0] if single else bits


def b158_quantize(u, cfg: B158Config = B158Config()) -> np.ndarray:
    """clip(round(u / (mean|u| + eps)), -1, 1) with halves rounded away from zero."""
    u2, single = _as_2d(u)
    if u2.shape[1] == 0:
        raise ValueError("cannot quantise an empty vector")
    u2 = u2.astype(np.float64, copy=False)
    gamma = np.abs(u2).mean(axis=1, keepdims=True)
    y = u2 / (gamma + cfg.epsilon)
    out = np.clip(np.sign(y) * np.floor(np.abs(y) + 0.5), -1, 1).astype(np.int8)
    return out[0] if single else out


@dataclass(frozen=True)
class QuantizerConfig:
    """Quantiser choice plus its parameters, as selected on the command line.

    ``x`` defaults to :func:`select_x` of the data dimension. The
    ``identity`` kind keeps float vectors and exists as a control for the
    search pipeline.
    """

    kind: str = "evp"
    x: int | None = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.kind not in QUANTIZERS:
            raise ValueError(f"unknown quantizer {self.kind!r}; expected one of {QUANTIZERS}")
        B158Config(self.epsilon)

    def evp_config(self, d: int) -> EvpConfig:
        return EvpConfig(d, self.x if self.x is not None else select_x(d))

    def encode(self, data) -> PackedTernary | PackedBinary | np.ndarray:
        """Quantise and pack a batch; returns a code collection usable by proxy search."""
        vectors = data.vectors if isinstance(data, Dataset) else np.asarray(data)
        if self.kind == "evp":
            cfg = self.evp_config(vectors.shape[-1])
            return pack(evp_quantize(vectors, cfg), x=cfg.x)
        if self.kind == "b158":
            return pack(b158_quantize(vectors, B158Config(self.epsilon)))
        if self.kind == "one-bit":
            return one_bit_quantize(vectors)
        return np.asarray(vectors, dtype=np.float32)

    @property
    def label(self) -> str:
        return self.kind if self.x is None or self.kind != "evp" else f"evp-x{self.x}"
