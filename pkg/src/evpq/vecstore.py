"""Float-vector datasets: loading, saving, normalisation, synthetic data and rotations.

All storage is float32. Synthetic data uses numpy's PCG64 bit generator
(``np.random.default_rng(seed)``) and its ziggurat standard-normal sampler,
so a given ``(seed, n, d)`` always yields the same bytes.
"""
from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

FORMATS = ("fvecs", "raw-f32", "csv")
RNG_ALGORITHM = "PCG64"
NORMAL_SAMPLER = "ziggurat"


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed under its declared format."""


@dataclass(frozen=True)
class Dataset:
    """An ordered, immutable set of float32 vectors of equal dimension.

    Row index is the datum identity used by search results.
    """

    vectors: np.ndarray
    name: str = "dataset"
    normalized: bool = False

    def __post_init__(self):
        v = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError(f"dataset vectors must be a 2-D (n, d) array with d >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("dataset contains NaN or Inf")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __getitem__(self, i):
        return self.vectors[i]

    def digest(self) -> str:
        """SHA-1 of the raw float32 bytes plus shape; used as a cache key."""
        h = hashlib.sha1()
        h.update(np.asarray(self.vectors.shape, dtype=np.int64).tobytes())
        h.update(self.vectors.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Rotation:
    """A seeded random orthonormal d x d matrix."""

    matrix: np.ndarray
    seed: int = field(default=0)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x):
        """Rotate a vector (d,) or each row of an (n, d) array / Dataset."""
        if isinstance(x, Dataset):
            return Dataset(self.apply(x.vectors), name=x.name, normalized=x.normalized)
        x = np.asarray(x)
        out = x.astype(np.float64) @ self.matrix.T
        return out.astype(np.float32) if x.dtype == np.float32 else out


def l2_normalize(v):
    """Scale ``v`` (or each row of a 2-D array) to unit Euclidean norm."""
    v = np.asarray(v)
    dtype = v.dtype if np.issubdtype(v.dtype, np.floating) else np.float64
    v64 = v.astype(np.float64)
    norms = np.linalg.norm(v64, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalise zero vector")
    return (v64 / norms).astype(dtype)


def generate_uniform_sphere(seed: int, n: int, d: int, name: str | None = None) -> Dataset:
    """Sample ``n`` points uniformly on the unit hypersphere in ``d`` dimensions."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    # probability of an all-zero row is nil, but l2_normalize would reject it
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return Dataset(x.astype(np.float32), name=name or f"uniform-{d}-s{seed}", normalized=True)


def random_rotation(seed: int, d: int) -> Rotation:
    """Haar-distributed orthonormal matrix from the QR factorisation of a Gaussian matrix."""
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    # sign fix makes the factorisation unique, hence the distribution uniform
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return Rotation(q * signs, seed=seed)


def load_dataset(path, format: str = "fvecs", d: int | None = None, name: str | None = None) -> Dataset:
    """Read a dataset file.

    ``raw-f32`` is headerless little-endian float32 and needs ``d``.
    ``fvecs`` records carry their own int32 dimension; if ``d`` is given it
    must match every header. ``csv`` has one comma-separated vector per line.
    """
    path = os.fspath(path)
    name = name or os.path.splitext(os.path.basename(path))[0]
    if format == "raw-f32":
        if d is None or d < 1:
            raise ValueError("raw-f32 needs a positive dimension d")
        size = os.path.getsize(path)
        if size % (4 * d):
            raise DatasetFormatError(
                f"{path}: size {size} bytes is not a multiple of 4*d={4 * d}; trailing record at offset {size - size % (4 * d)}"
            )
        data = np.fromfile(path, dtype="<f4").reshape(-1, d)
        return Dataset(data, name=name)
    if format == "fvecs":
        return Dataset(_read_fvecs(path, d), name=name)
    if format == "csv":
        return Dataset(_read_csv(path, d), name=name)
    raise ValueError(f"unknown dataset format {format!r}; expected one of {FORMATS}")


def write_dataset(path, data, format: str = "raw-f32") -> None:
    vectors = data.vectors if isinstance(data, Dataset) else np.asarray(data, dtype=np.float32)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    path = os.fspath(path)
    if format == "raw-f32":
        vectors.tofile(path)
    elif format == "fvecs":
        n, d = vectors.shape
        rec = np.empty((n, d + 1), dtype="<f4")
        rec[:, 0] = np.array([d], dtype="<i4").view("<f4")[0]
        rec[:, 1:] = vectors
        rec.tofile(path)
    elif format == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            for row in vectors:
                w.writerow([repr(float(v)) for v in row])
    else:
        raise ValueError(f"unknown dataset format {format!r}; expected one of {FORMATS}")


def _read_fvecs(path: str, d: int | None) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.empty((0, d or 1), dtype=np.float32)
    if raw.size < 4:
        raise DatasetFormatError(f"{path}: truncated header at offset 0")
    dim = int(raw[:4].view("<i4")[0])
    if dim < 1:
        raise DatasetFormatError(f"{path}: invalid dimension {dim} at offset 0")
    if d is not None and dim != d:
        raise DatasetFormatError(f"{path}: dimension mismatch at offset 0: header says {dim}, expected {d}")
    rec = 4 * (dim + 1)
    if raw.size % rec:
        raise DatasetFormatError(f"{path}: truncated record at offset {raw.size - raw.size % rec}")
    words = raw.view("<i4").reshape(-1, dim + 1)
    bad = np.flatnonzero(words[:, 0] != dim)
    if bad.size:
        raise DatasetFormatError(
            f"{path}: dimension mismatch at offset {int(bad[0]) * rec}: header says {int(words[bad[0], 0])}, expected {dim}"
        )
    return words[:, 1:].view("<f4").astype(np.float32)


def _read_csv(path: str, d: int | None) -> np.ndarray:
    rows = []
    offset = 0
    with open(path, newline="") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if text:
                try:
                    row = [float(t) for t in text.split(",")]
                except ValueError as e:
                    raise DatasetFormatError(f"{path}: line {lineno} (offset {offset}): {e}") from None
                if d is not None and len(row) != d:
                    raise DatasetFormatError(
                        f"{path}: line {lineno} (offset {offset}) has {len(row)} values, expected {d}"
                    )
                if rows and len(row) != len(rows[0]):
                    raise DatasetFormatError(f"{path}: line {lineno} (offset {offset}) has inconsistent width")
                rows.append(row)
            offset += len(line.encode())
    if not rows:
        raise DatasetFormatError(f"{path}: no vectors found")
    return np.asarray(rows, dtype=np.float32)
