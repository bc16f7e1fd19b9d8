"""Timing harness for the distance kernels and for end-to-end exhaustive scans.

Operands are generated before the clock starts, each kernel gets one
untimed warm-up call (which also triggers JIT compilation), and the sum of
all kernel outputs is kept as a checksum so the work cannot be skipped.
Everything runs on the calling thread.
"""
from __future__ import annotations

import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import bitcode
from .bitcode import _native
from .quantize import EvpConfig, QuantizerConfig, evp_quantize, one_bit_quantize, select_x
from .vecstore import Dataset, generate_uniform_sphere

KERNELS = ("b2sp", "euclidean-f32", "hamming", "masked-add")
DEFAULT_POOL = 1000


@dataclass
class BenchReport:
    kernel: str
    d: int
    count: int
    trials: int
    fastest_ms: float
    slowest_ms: float
    median_ms: float
    mean_ms: float
    per_op_ns: float
    checksum: float
    hardware: str

    def to_record(self) -> dict:
        return asdict(self)


def hardware_description() -> str:
    model = ""
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    model = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    model = model or platform.processor() or platform.machine()
    return f"{model}; {os.cpu_count()} logical cpus; {platform.system()} {platform.release()}; python {platform.python_version()}"


def _report(kernel, d, count, times, checksum) -> BenchReport:
    ms = [t * 1e3 for t in times]
    mean = statistics.fmean(ms)
    return BenchReport(
        kernel=kernel,
        d=d,
        count=count,
        trials=len(ms),
        fastest_ms=min(ms),
        slowest_ms=max(ms),
        median_ms=statistics.median(ms),
        mean_ms=mean,
        per_op_ns=mean * 1e6 / count,
        checksum=float(checksum),
        hardware=hardware_description(),
    )


def _time(fn, trials):
    checksum = fn()  # warm-up
    times = []
    for _ in range(trials):
        t0 = time.perf_counter()
        value = fn()
        times.append(time.perf_counter() - t0)
        if value != checksum:
            raise RuntimeError(f"kernel result changed between runs: {value} != {checksum}")
    return times, checksum


@dataclass
class KernelOperands:
    """Pre-generated pool of ``pool`` data operands plus one query, for one kernel."""

    kernel: str
    d: int
    data: tuple
    query: tuple

    def run(self, count: int):
        """Timed-path loop: ``count`` comparisons, rows taken cyclically; returns the output sum."""
        if _native is None:
            raise RuntimeError("benchmarks need the numba kernels")
        fn = {
            "b2sp": _native.b2sp_loop,
            "hamming": _native.hamming_loop,
            "euclidean-f32": _native.euclidean_loop,
            "masked-add": _native.masked_add_loop,
        }[self.kernel]
        return fn(*self.data, *self.query, count)

    def reference_checksum(self, count: int):
        """Same sum computed with vectorised numpy, independent of the timed loop."""
        n = self.data[0].shape[0]
        reps, rest = divmod(count, n)
        if self.kernel == "b2sp":
            v = bitcode.unpack(bitcode.PackedTernary(self.data[0], self.data[1], self.d)).astype(np.int64)
            q = bitcode.unpack(bitcode.PackedTernary(self.query[0], self.query[1], self.d)).astype(np.int64)
            per_row = v @ q
        elif self.kernel == "hamming":
            v = bitcode.unpack_bits(bitcode.PackedBinary(self.data[0], self.d))
            q = bitcode.unpack_bits(bitcode.PackedBinary(self.query[0], self.d))
            per_row = (v != q).sum(axis=1).astype(np.int64)
        elif self.kernel == "masked-add":
            v = bitcode.unpack(bitcode.PackedTernary(self.data[0], self.data[1], self.d)).astype(np.float64)
            per_row = v @ self.query[0]
        else:
            X = self.data[0].astype(np.float64)
            per_row = np.sqrt(((X - self.query[0].astype(np.float64)) ** 2).sum(axis=1))
        return reps * per_row.sum() + per_row[:rest].sum()


def make_operands(kernel: str, d: int, pool: int = DEFAULT_POOL, seed: int = 0) -> KernelOperands:
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    data = generate_uniform_sphere(seed, pool + 1, d).vectors
    rows, q = data[:pool], data[pool]
    if kernel in ("b2sp", "masked-add"):
        cfg = EvpConfig(d, select_x(d)) if d >= 2 else EvpConfig(d, 1)
        codes = bitcode.pack(evp_quantize(rows, cfg), x=cfg.x)
        if kernel == "b2sp":
            qc = bitcode.pack(evp_quantize(q, cfg), x=cfg.x)
            return KernelOperands(kernel, d, (codes.plus, codes.minus), (qc.plus, qc.minus))
        return KernelOperands(kernel, d, (codes.plus, codes.minus), (q.astype(np.float64),))
    if kernel == "hamming":
        return KernelOperands(kernel, d, (one_bit_quantize(rows).bits,), (one_bit_quantize(q).bits,))
    return KernelOperands(kernel, d, (np.ascontiguousarray(rows),), (np.ascontiguousarray(q),))


def bench_kernel(kernel: str, d: int, count: int, trials: int = 5, pool: int = DEFAULT_POOL, seed: int = 0) -> BenchReport:
    """Time ``trials`` runs of ``count`` single-threaded comparisons of one kernel."""
    if count < 1 or trials < 1:
        raise ValueError("count and trials must be >= 1")
    ops = make_operands(kernel, d, pool, seed)
    times, checksum = _time(lambda: ops.run(count), trials)
    return _report(kernel, d, count, times, checksum)


@dataclass
class FullScanResult:
    float_scan: BenchReport
    code_scan: BenchReport

    @property
    def speedup(self) -> float:
        return self.float_scan.mean_ms / self.code_scan.mean_ms

    def to_record(self) -> dict:
        return {"euclidean": self.float_scan.to_record(), "codes": self.code_scan.to_record(), "speedup": self.speedup}


def bench_full_scan(data, queries: int = 100, quantizer: QuantizerConfig = QuantizerConfig(), trials: int = 5, seed: int = 0) -> FullScanResult:
    """Time ``queries`` exhaustive scans over the float data and over its packed codes.

    Queries are rows of ``data`` picked with ``seed``. Data is quantised
    before timing; queries are quantised inside the timed region, as a
    search service would have to.
    """
    X = np.ascontiguousarray(data.vectors if isinstance(data, Dataset) else data, dtype=np.float32)
    if quantizer.kind in ("identity", "one-bit"):
        raise ValueError("full-scan benchmark compares float Euclidean against ternary codes; use evp or b158")
    rng = np.random.default_rng(seed)
    Q = X[rng.choice(X.shape[0], size=min(queries, X.shape[0]), replace=False)]
    codes = quantizer.encode(X)
    out_f = np.empty(X.shape[0], dtype=np.float32)
    out_i = np.empty(X.shape[0], dtype=np.int64)

    def float_scan():
        s = 0.0
        for q in Q:
            _native.euclidean_scan_f32(X, q, out_f)
            s += float(out_f.min())
        return s

    def code_scan():
        s = 0
        qc = quantizer.encode(Q)
        for i in range(Q.shape[0]):
            _native.b2sp_scan(codes.plus, codes.minus, qc.plus[i], qc.minus[i], out_i)
            s += int(out_i.max())
        return s

    tf, cf = _time(float_scan, trials)
    tc, cc = _time(code_scan, trials)
    d = X.shape[1]
    n_cmp = X.shape[0] * Q.shape[0]
    return FullScanResult(_report("euclidean-f32-scan", d, n_cmp, tf, cf), _report("b2sp-scan", d, n_cmp, tc, cc))
