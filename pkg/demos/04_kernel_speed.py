"""Per-comparison cost of the bit-plane kernels next to float32 Euclidean distance."""
# %%
from evpq.bench import bench_full_scan, bench_kernel, hardware_description
from evpq.quantize import QuantizerConfig
from evpq.vecstore import generate_uniform_sphere

print(hardware_description())

# %%
for d in (100, 300):
    for kernel in ("b2sp", "hamming", "masked-add", "euclidean-f32"):
        r = bench_kernel(kernel, d, count=200_000, trials=3)
        print(f"d={d:3d} {kernel:14s} {r.per_op_ns:8.1f} ns/op  (median {r.median_ms:.2f} ms)")

# %% [markdown]
# End to end: 50 queries scanned against 20k rows, codes vs floats.

# %%
data = generate_uniform_sphere(seed=1, n=20_000, d=100)
res = bench_full_scan(data, queries=50, quantizer=QuantizerConfig("evp"), trials=3)
print(f"float scan {res.float_scan.mean_ms:.1f} ms, code scan {res.code_scan.mean_ms:.1f} ms, speedup {res.speedup:.1f}x")
