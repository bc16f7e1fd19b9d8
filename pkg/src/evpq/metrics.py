"""Float-space distances, pair sampling, Spearman rank correlation and isotonic fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .bitcode import PackedBinary, b2sp_pairs, hamming_pairs
from .vecstore import Dataset


@dataclass(frozen=True)
class DistancePairSample:
    """Paired (true distance, proxy value) observations for one quantiser."""

    true_distance: np.ndarray
    proxy_value: np.ndarray
    proxy_kind: str = "evp"
    sample_seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.true_distance, dtype=np.float64)
        p = np.asarray(self.proxy_value, dtype=np.float64)
        if t.shape != p.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("need equal-length, nonempty 1-D true_distance and proxy_value")
        if np.any(t < 0):
            raise ValueError("true distances must be non-negative")
        object.__setattr__(self, "true_distance", t)
        object.__setattr__(self, "proxy_value", p)

    def __len__(self):
        return self.true_distance.size


@dataclass(frozen=True)
class IsotonicFit:
    breakpoints: np.ndarray
    levels: np.ndarray

    def __call__(self, x):
        """Evaluate the step function (constant between breakpoints, clamped outside)."""
        i = np.searchsorted(self.breakpoints, x, side="right") - 1
        return self.levels[np.clip(i, 0, len(self.levels) - 1)]


def _check(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    return u, v


def euclidean(u, v):
    u, v = _check(u, v)
    return np.sqrt(np.sum((u - v) ** 2, axis=-1))


def dot(u, v):
    u, v = _check(u, v)
    return np.sum(u * v, axis=-1)


def sample_pairs(data, count: int, seed: int = 0) -> np.ndarray:
    """``count`` distinct unordered index pairs (i < j), uniform over all pairs.

    Returns an int64 array of shape (count, 2).
    """
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 rows to sample pairs")
    total = n * (n - 1) // 2
    if count > total:
        raise ValueError(f"cannot draw {count} distinct pairs from {n} rows ({total} available)")
    rng = np.random.default_rng(seed)
    if count * 2 > total:
        flat = rng.choice(total, size=count, replace=False)
    else:
        flat = np.empty(0, dtype=np.int64)
        while flat.size < count:
            extra = rng.integers(0, total, size=2 * (count - flat.size) + 16)
            merged = np.concatenate([flat, extra])
            _, first = np.unique(merged, return_index=True)
            flat = merged[np.sort(first)][:count]
    return _unrank_pairs(np.asarray(flat, dtype=np.int64), n)


def _unrank_pairs(k: np.ndarray, n: int) -> np.ndarray:
    # row i owns the (n - 1 - i) pairs (i, i+1) .. (i, n-1), laid out consecutively
    starts = np.arange(n, dtype=np.int64)
    starts = starts * (2 * n - starts - 1) // 2
    i = np.searchsorted(starts, k, side="right") - 1
    j = k - starts[i] + i + 1
    return np.stack([i, j], axis=1)


def pair_distances(data, pairs) -> np.ndarray:
    v = data.vectors if isinstance(data, Dataset) else np.asarray(data)
    pairs = np.asarray(pairs)
    return euclidean(v[pairs[:, 0]], v[pairs[:, 1]])


def spearman_rho(xs, ys) -> float:
    """Pearson correlation of average ranks."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size == 0:
        raise ValueError("need two nonempty sequences of equal length")
    rx = rankdata(xs) - (xs.size + 1) / 2
    ry = rankdata(ys) - (ys.size + 1) / 2
    sx = np.sqrt(np.dot(rx, rx))
    sy = np.sqrt(np.dot(ry, ry))
    if sx == 0 or sy == 0:
        raise ValueError("degenerate ranks: a sequence has zero rank variance")
    return float(np.clip(np.dot(rx, ry) / (sx * sy), -1.0, 1.0))


def isotonic_fit(pairs: DistancePairSample) -> IsotonicFit:
    """Least-squares non-decreasing fit of true distance against proxy value.

    Observations sharing a proxy value are pooled first, so the fit has one
    level per distinct proxy value. Pool-adjacent-violators on the pooled means.
    """
    x, y = pairs.proxy_value, pairs.true_distance
    keys, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=y)

    # stack of blocks: (weight, mean, number of distinct keys covered)
    weights, means, spans = [], [], []
    for c, s in zip(counts.astype(np.float64), sums):
        w, m, k = c, s / c, 1
        while means and means[-1] > m:
            pw, pm, pk = weights.pop(), means.pop(), spans.pop()
            m = (pw * pm + w * m) / (pw + w)
            w += pw
            k += pk
        weights.append(w)
        means.append(m)
        spans.append(k)
    levels = np.repeat(np.asarray(means), spans)
    return IsotonicFit(keys.astype(np.float64), levels)


def sum_squared_error(fit: IsotonicFit, pairs: DistancePairSample) -> float:
    r = pairs.true_distance - fit(pairs.proxy_value)
    return float(np.dot(r, r))


def proxy_pair_values(codes, pairs) -> np.ndarray:
    """Proxy distance for each index pair: -b2sp for ternary codes, Hamming for 1-bit."""
    pairs = np.asarray(pairs)
    if isinstance(codes, PackedBinary):
        return hamming_pairs(codes, pairs[:, 0], pairs[:, 1]).astype(np.float64)
    return -b2sp_pairs(codes, pairs[:, 0], pairs[:, 1]).astype(np.float64)


def correlate(data: Dataset, quantizers=("evp", "one-bit", "b158"), pairs: int = 10_000, seed: int = 0, x=None, epsilon=1e-6):
    """Sample one set of pairs and pair each quantiser's proxy with the true distance.

    Returns ``{kind: DistancePairSample}``.
    """
    from .quantize import QuantizerConfig

    idx = sample_pairs(data, pairs, seed)
    true = pair_distances(data, idx)
    out = {}
    for kind in quantizers:
        qc = QuantizerConfig(kind, x if kind == "evp" else None, epsilon)
        out[kind] = DistancePairSample(true, proxy_pair_values(qc.encode(data), idx), kind, seed)
    return out
