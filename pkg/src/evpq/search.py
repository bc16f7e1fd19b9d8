"""Exhaustive k-NN in float space and over packed codes, reranking and k@n recall.

Scores are always "smaller is closer": Euclidean distance for floats, the
negated ternary scalar product for ternary codes and Hamming distance for
1-bit codes. Equal scores are ordered by row index.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bitcode import PackedBinary, PackedTernary, b2sp_scan, hamming_scan
from .quantize import QuantizerConfig
from .vecstore import Dataset

DEFAULT_K = 30
DEFAULT_NS = (30, 50, 100, 200, 500)
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class NeighborList:
    indices: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return self.indices.size

    def __iter__(self):
        return zip(self.indices.tolist(), self.scores.tolist())


@dataclass
class RecallReport:
    per_query: np.ndarray
    k: int
    n: int
    quantizer: str
    mean: float = field(init=False)

    def __post_init__(self):
        self.per_query = np.asarray(self.per_query, dtype=np.float64)
        self.mean = float(self.per_query.mean()) if self.per_query.size else float("nan")

    def histogram(self, bins: int = HISTOGRAM_BINS) -> np.ndarray:
        counts, _ = np.histogram(self.per_query, bins=bins, range=(0.0, 1.0))
        return counts

    def to_record(self) -> dict:
        return {
            "quantizer": self.quantizer,
            "k": self.k,
            "n": self.n,
            "queries": int(self.per_query.size),
            "mean_recall": self.mean,
            "histogram": self.histogram().tolist(),
        }


def top_k(scores, k: int) -> NeighborList:
    """The ``k`` smallest scores, ties broken by lower index."""
    scores = np.asarray(scores)
    k = min(k, scores.size)
    if k <= 0:
        return NeighborList(np.empty(0, dtype=np.int64), scores[:0])
    if k < scores.size:
        threshold = np.partition(scores, k - 1)[k - 1]
        below = np.flatnonzero(scores < threshold)
        tied = np.flatnonzero(scores == threshold)[: k - below.size]
        idx = np.concatenate([below, tied])
    else:
        idx = np.arange(scores.size)
    order = np.lexsort((idx, scores[idx]))
    idx = idx[order].astype(np.int64)
    return NeighborList(idx, scores[idx])


def _vectors(data):
    return data.vectors if isinstance(data, Dataset) else np.asarray(data)


def exact_knn(data, q, k: int) -> NeighborList:
    """The ``k`` rows nearest to ``q`` by Euclidean distance (truncated if k > n)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    X = _vectors(data)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (X.shape[1],):
        raise ValueError(f"query dimension {q.shape} does not match dataset dimension {X.shape[1]}")
    dist = np.sqrt(np.sum((X.astype(np.float64) - q) ** 2, axis=1))
    return top_k(dist, k)


def proxy_scores(codes, q_code) -> np.ndarray:
    """Score every stored code against the query code (smaller is closer)."""
    if isinstance(codes, PackedTernary):
        if not isinstance(q_code, PackedTernary) or q_code.d != codes.d or q_code.x != codes.x:
            raise ValueError("query code must be a ternary code with the same d and x as the collection")
        return -b2sp_scan(codes, q_code)
    if isinstance(codes, PackedBinary):
        if not isinstance(q_code, PackedBinary) or q_code.d != codes.d:
            raise ValueError("query code must be a 1-bit code with the same d as the collection")
        return hamming_scan(codes, q_code)
    if isinstance(codes, (np.ndarray, Dataset)):
        X = _vectors(codes)
        q = np.asarray(q_code)
        if q.ndim != 1 or q.shape[0] != X.shape[1]:
            raise ValueError("query vector dimension does not match the collection")
        return np.sqrt(np.sum((X.astype(np.float64) - q.astype(np.float64)) ** 2, axis=1))
    raise TypeError(f"unsupported code collection {type(codes).__name__}")


def proxy_knn(codes, q_code, n: int) -> NeighborList:
    return top_k(proxy_scores(codes, q_code), n)


def recall_k_at_n(truth: NeighborList, proxy: NeighborList, k: int, n: int) -> float:
    """|top-k(truth) ∩ top-n(proxy)| / k."""
    if len(truth) < k or len(proxy) < n:
        raise ValueError(f"need >= {k} truth entries and >= {n} proxy entries, got {len(truth)} and {len(proxy)}")
    hits = np.intersect1d(truth.indices[:k], proxy.indices[:n], assume_unique=True)
    return hits.size / k


def rerank(candidates: NeighborList, data, q, k: int) -> NeighborList:
    """Re-score candidates by exact Euclidean distance to ``q`` and keep the best ``k``."""
    X = _vectors(data)
    idx = np.asarray(candidates.indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("no candidates to rerank")
    if np.any((idx < 0) | (idx >= X.shape[0])):
        raise IndexError("candidate index out of range")
    dist = np.sqrt(np.sum((X[idx].astype(np.float64) - np.asarray(q, dtype=np.float64)) ** 2, axis=1))
    order = np.lexsort((idx, dist))[:k]
    return NeighborList(idx[order], dist[order])


def _map(fn, items, threads: int | None):
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def ground_truth(data, queries, k: int, cache_dir=None, threads: int | None = None) -> np.ndarray:
    """Exact top-k row indices for every query, shape (n_queries, k).

    With ``cache_dir`` set, results are stored as .npy keyed by a hash of
    both datasets and ``k``.
    """
    X, Q = _vectors(data), _vectors(queries)
    path = None
    if cache_dir is not None:
        h = hashlib.sha1()
        for arr in (X, Q):
            h.update(np.asarray(arr.shape, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(arr, dtype=np.float32).tobytes())
        h.update(str(k).encode())
        path = os.path.join(os.fspath(cache_dir), f"gt-{h.hexdigest()[:16]}-k{k}.npy")
        if os.path.exists(path):
            return np.load(path)
    rows = _map(lambda i: exact_knn(X, Q[i], k).indices, range(Q.shape[0]), threads)
    out = np.stack(rows) if rows else np.empty((0, k), dtype=np.int64)
    if path is not None:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        np.save(path, out)
    return out


def run_recall_experiment(
    data,
    queries,
    k: int = DEFAULT_K,
    ns=DEFAULT_NS,
    quantizer: QuantizerConfig = QuantizerConfig(),
    truth: np.ndarray | None = None,
    threads: int | None = None,
) -> list[RecallReport]:
    """k@n recall of the proxy ranking for every n in ``ns``.

    Data and queries are quantised with the same configuration. Queries that
    are also rows of ``data`` simply find themselves; nothing is excluded.
    """
    X, Q = _vectors(data), _vectors(queries)
    ns = sorted(int(n) for n in ns)
    if not ns or ns[0] < k:
        raise ValueError(f"every n must be >= k={k}, got {ns}")
    if truth is None:
        truth = ground_truth(X, Q, k, threads=threads)
    codes = quantizer.encode(X)
    q_codes = quantizer.encode(Q)
    n_max = ns[-1]

    def one(i):
        t = NeighborList(truth[i][:k], np.zeros(k))
        p = proxy_knn(codes, q_codes[i], n_max)
        return [recall_k_at_n(t, p, k, min(n, len(p))) for n in ns]

    table = np.asarray(_map(one, range(Q.shape[0]), threads)).reshape(Q.shape[0], len(ns))
    return [RecallReport(table[:, j], k, n, quantizer.label) for j, n in enumerate(ns)]
