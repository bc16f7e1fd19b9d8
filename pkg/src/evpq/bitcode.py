"""Bit-plane packing of ternary and binary codes, and the distance kernels over them.

A ternary code ``v`` is stored as two bit planes: ``plus`` has bit i set iff
v_i = +1 and ``minus`` has bit i set iff v_i = -1. Each plane is an array of
uint64 words; bit i lives in word ``i // 64`` at offset ``i % 64`` (LSB first),
so the little-endian byte image of a plane has bit i in byte ``i // 8`` at
offset ``i % 8``. Planes are zero-padded to a multiple of 256 bits.

Planes may be 1-D (one code) or 2-D (a collection, one code per row).
Kernels run through numba with the hardware popcount when numba is
importable, otherwise through portable numpy implementations.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

try:
    from . import _native
except ImportError:  # pragma: no cover - numba is a declared dependency
    _native = None

NATIVE = _native is not None

PAD_BITS = 256
WORD_BITS = 64
MAGIC_TERNARY = b"EVPB"
MAGIC_BINARY = b"EVPS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBIIQ")


class CorruptCodeError(ValueError):
    """A packed ternary code has a position set in both planes."""


def padded_bits(d: int) -> int:
    """Smallest multiple of 256 that is >= d."""
    return max(1, -(-d // PAD_BITS)) * PAD_BITS


def n_words(d: int) -> int:
    return padded_bits(d) // WORD_BITS


@dataclass(frozen=True)
class PackedTernary:
    plus: np.ndarray
    minus: np.ndarray
    d: int
    x: int = 0  # nonzero budget, 0 when the codes are not EVP codes

    def __post_init__(self):
        if self.plus.shape != self.minus.shape or self.plus.dtype != np.uint64:
            raise ValueError("plus and minus planes must be uint64 arrays of equal shape")
        if self.plus.shape[-1] != n_words(self.d):
            raise ValueError(f"planes have {self.plus.shape[-1]} words, d={self.d} needs {n_words(self.d)}")

    @property
    def padded_bits(self) -> int:
        return padded_bits(self.d)

    def __len__(self) -> int:
        return 1 if self.plus.ndim == 1 else self.plus.shape[0]

    def __getitem__(self, i) -> "PackedTernary":
        return PackedTernary(self.plus[i], self.minus[i], self.d, self.x)

    def validate(self) -> "PackedTernary":
        if np.any(self.plus & self.minus):
            raise CorruptCodeError("corrupt ternary code: a position is set in both plus and minus planes")
        mask = _pad_mask(self.d)
        if np.any((self.plus | self.minus) & ~mask):
            raise CorruptCodeError("corrupt ternary code: pad bits beyond d are set")
        return self


@dataclass(frozen=True)
class PackedBinary:
    bits: np.ndarray
    d: int

    def __post_init__(self):
        if self.bits.dtype != np.uint64:
            raise ValueError("bit plane must be a uint64 array")
        if self.bits.shape[-1] != n_words(self.d):
            raise ValueError(f"plane has {self.bits.shape[-1]} words, d={self.d} needs {n_words(self.d)}")

    @property
    def padded_bits(self) -> int:
        return padded_bits(self.d)

    def __len__(self) -> int:
        return 1 if self.bits.ndim == 1 else self.bits.shape[0]

    def __getitem__(self, i) -> "PackedBinary":
        return PackedBinary(self.bits[i], self.d)


def _pad_mask(d: int) -> np.ndarray:
    flags = np.zeros(padded_bits(d), dtype=bool)
    flags[:d] = True
    return _flags_to_words(flags)


def _flags_to_words(flags: np.ndarray) -> np.ndarray:
    """Pack a boolean array (..., padded_bits) into uint64 words, LSB first."""
    packed = np.packbits(flags, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def _words_to_flags(words: np.ndarray, d: int) -> np.ndarray:
    b = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(b, axis=-1, bitorder="little")[..., :d].astype(bool)


def _padded_flags(mask: np.ndarray) -> np.ndarray:
    d = mask.shape[-1]
    out = np.zeros(mask.shape[:-1] + (padded_bits(d),), dtype=bool)
    out[..., :d] = mask
    return out


def pack(v, x: int = 0) -> PackedTernary:
    """Pack ternary code(s) over {-1, 0, 1} into plus/minus bit planes."""
    v = np.asarray(v)
    if v.ndim not in (1, 2) or v.shape[-1] < 1:
        raise ValueError(f"expected a ternary vector or batch, got shape {v.shape}")
    if not np.all(np.isin(v, (-1, 0, 1))):
        raise ValueError("ternary code contains values outside {-1, 0, 1}")
    d = v.shape[-1]
    return PackedTernary(_flags_to_words(_padded_flags(v == 1)), _flags_to_words(_padded_flags(v == -1)), d, x)


def unpack(p: PackedTernary) -> np.ndarray:
    """Inverse of :func:`pack`; rejects codes whose planes overlap."""
    p.validate()
    return _words_to_flags(p.plus, p.d).astype(np.int8) - _words_to_flags(p.minus, p.d).astype(np.int8)


def pack_bits(bits, d: int | None = None) -> PackedBinary:
    """Pack a boolean array (d,) or (n, d) into a single padded bit plane."""
    bits = np.asarray(bits, dtype=bool)
    return PackedBinary(_flags_to_words(_padded_flags(bits)), bits.shape[-1] if d is None else d)


def unpack_bits(p: PackedBinary) -> np.ndarray:
    return _words_to_flags(p.bits, p.d)


# --- portable kernels -------------------------------------------------------

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def popcount_portable(words) -> np.ndarray:
    """Per-word population count by SWAR bit arithmetic."""
    w = np.asarray(words, dtype=np.uint64)
    w = w - ((w >> np.uint64(1)) & _M1)
    w = (w & _M2) + ((w >> np.uint64(2)) & _M2)
    w = (w + (w >> np.uint64(4))) & _M4
    return (w * _H01) >> np.uint64(56)


def _count(words) -> np.ndarray:
    return popcount_portable(words).sum(axis=-1, dtype=np.int64)


def popcount(words, native: bool | None = None) -> int:
    """Total number of set bits in a 1-D word array."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    if (NATIVE if native is None else native) and words.ndim == 1:
        return int(_native.popcount(words))
    return int(_count(words).sum())


# --- public kernels ---------------------------------------------------------


def _check_planes(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"bit-plane length mismatch: {a.shape[-1] * 64} vs {b.shape[-1] * 64} bits")


def bsp(a, b) -> int:
    """Bitwise scalar product: popcount(a AND b)."""
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if a.shape != b.shape:
        raise ValueError(f"bit-plane length mismatch: {a.size * 64} vs {b.size * 64} bits")
    if NATIVE and a.ndim == 1:
        return int(_native.bsp(a, b))
    return int(_count(a & b))


def _check_dim(d1: int, d2: int):
    if d1 != d2:
        raise ValueError(f"dimension mismatch: {d1} vs {d2}")


def b2sp(v: PackedTernary, w: PackedTernary) -> int:
    """Scalar product of two ternary codes from their bit planes."""
    _check_dim(v.d, w.d)
    if NATIVE:
        return int(_native.b2sp(v.plus, v.minus, w.plus, w.minus))
    return (bsp(v.plus, w.plus) + bsp(v.minus, w.minus)) - (bsp(v.plus, w.minus) + bsp(v.minus, w.plus))


def hamming(a: PackedBinary, b: PackedBinary) -> int:
    _check_dim(a.d, b.d)
    if NATIVE:
        return int(_native.hamming(a.bits, b.bits))
    return int(_count(a.bits ^ b.bits))


def masked_add_sp(v: PackedTernary, w) -> float:
    """Scalar product of a packed ternary code with a float vector, without multiplies."""
    w = np.asarray(w)
    _check_dim(v.d, w.shape[-1])
    if NATIVE:
        return float(_native.masked_add(v.plus, v.minus, np.ascontiguousarray(w, dtype=np.float64)))
    flags_p = _words_to_flags(v.plus, v.d)
    flags_m = _words_to_flags(v.minus, v.d)
    w64 = w.astype(np.float64)
    return float(w64[flags_p].sum() - w64[flags_m].sum())


def ternary_dot_reference(a, b) -> int:
    """Plain element-by-element integer scalar product; the oracle for :func:`b2sp`."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    total = 0
    for ai, bi in zip(a, b):
        total += int(ai) * int(bi)
    return total


def b2sp_scan(codes: PackedTernary, q: PackedTernary) -> np.ndarray:
    """b2sp of query ``q`` against every row of ``codes``; int64 array."""
    _check_dim(codes.d, q.d)
    P = np.atleast_2d(codes.plus)
    M = np.atleast_2d(codes.minus)
    if NATIVE:
        out = np.empty(P.shape[0], dtype=np.int64)
        _native.b2sp_scan(P, M, q.plus, q.minus, out)
        return out
    return (_count(P & q.plus) + _count(M & q.minus)) - (_count(P & q.minus) + _count(M & q.plus))


def hamming_scan(codes: PackedBinary, q: PackedBinary) -> np.ndarray:
    _check_dim(codes.d, q.d)
    B = np.atleast_2d(codes.bits)
    if NATIVE:
        out = np.empty(B.shape[0], dtype=np.int64)
        _native.hamming_scan(B, q.bits, out)
        return out
    return _count(B ^ q.bits)


def euclidean_scan_f32(X, q) -> np.ndarray:
    """Float32 Euclidean distance from ``q`` to each row of ``X``, plain sequential summation."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    q = np.ascontiguousarray(q, dtype=np.float32)
    if NATIVE:
        out = np.empty(X.shape[0], dtype=np.float32)
        _native.euclidean_scan_f32(X, q, out)
        return out
    return np.sqrt(((X - q) ** 2).sum(axis=1, dtype=np.float32))


def b2sp_pairs(codes: PackedTernary, left, right) -> np.ndarray:
    """b2sp between rows ``left[t]`` and ``right[t]`` of one collection."""
    P, M = np.atleast_2d(codes.plus), np.atleast_2d(codes.minus)
    vp, vm, wp, wm = P[left], M[left], P[right], M[right]
    return (_count(vp & wp) + _count(vm & wm)) - (_count(vp & wm) + _count(vm & wp))


def hamming_pairs(codes: PackedBinary, left, right) -> np.ndarray:
    B = np.atleast_2d(codes.bits)
    return _count(B[left] ^ B[right])


# --- serialisation ----------------------------------------------------------
#
# Header (little-endian): magic[4], version u8, d u32, x u32, rows u64.
# "EVPB": per row the plus plane then the minus plane, padded_bits/8 bytes each.
# "EVPS": per row one sign plane (1-bit codes); x is written as 0.


def write_codes(path, codes: PackedTernary | PackedBinary) -> None:
    if isinstance(codes, PackedTernary):
        codes.validate()
        planes = [np.atleast_2d(codes.plus), np.atleast_2d(codes.minus)]
        magic, x = MAGIC_TERNARY, codes.x
    elif isinstance(codes, PackedBinary):
        planes = [np.atleast_2d(codes.bits)]
        magic, x = MAGIC_BINARY, 0
    else:
        raise TypeError(f"cannot serialise {type(codes).__name__}")
    rows = planes[0].shape[0]
    body = np.concatenate(planes, axis=1).astype("<u8")
    with open(os.fspath(path), "wb") as f:
        f.write(_HEADER.pack(magic, FORMAT_VERSION, codes.d, x, rows))
        f.write(body.tobytes())


def read_codes(path) -> PackedTernary | PackedBinary:
    """Read a code file; ternary codes are validated for plane overlap."""
    with open(os.fspath(path), "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, d, x, rows = _HEADER.unpack(head)
        if magic not in (MAGIC_TERNARY, MAGIC_BINARY):
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        n_planes = 2 if magic == MAGIC_TERNARY else 1
        w = n_words(d)
        expected = rows * n_planes * w * 8
        body = f.read()
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes after header, found {len(body)}")
    words = np.frombuffer(body, dtype="<u8").astype(np.uint64).reshape(rows, n_planes * w)
    if magic == MAGIC_BINARY:
        return PackedBinary(np.ascontiguousarray(words), d)
    codes = PackedTernary(np.ascontiguousarray(words[:, :w]), np.ascontiguousarray(words[:, w:]), d, x)
    return codes.validate()
