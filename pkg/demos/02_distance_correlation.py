"""How well do code-space proxies track true Euclidean distance on the unit sphere?"""
# %%
import csv
import os
import tempfile

import numpy as np

from evpq.metrics import correlate, isotonic_fit, spearman_rho, sum_squared_error
from evpq.vecstore import generate_uniform_sphere

N, D = int(os.environ.get("DEMO_N", 20_000)), 100
data = generate_uniform_sphere(seed=1, n=N, d=D)
print(data.name, len(data), "rows, digest", data.digest()[:12])

# %%
samples = correlate(data, ("evp", "b158", "one-bit"), pairs=10_000, seed=0)
for kind, s in samples.items():
    fit = isotonic_fit(s)
    print(f"{kind:8s} rho={spearman_rho(s.true_distance, s.proxy_value):.4f}  "
          f"isotonic sse={sum_squared_error(fit, s):.2f}  levels={len(fit.levels)}")

# %% [markdown]
# The Shepard data (true distance vs proxy) can be plotted from the CSV below.

# %%
out = tempfile.mkdtemp(prefix="evpq-shepard-")
s = samples["evp"]
with open(os.path.join(out, "shepard-evp.csv"), "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["proxy", "true_distance"])
    w.writerows(zip(s.proxy_value.tolist(), s.true_distance.tolist()))
print("wrote", out)

# %%
# bucket means make the monotone trend visible without a plot
edges = np.quantile(s.proxy_value, np.linspace(0, 1, 6))
bucket = np.clip(np.searchsorted(edges, s.proxy_value, side="right") - 1, 0, 4)
for b in range(5):
    sel = bucket == b
    print(f"proxy in [{edges[b]:6.1f}, {edges[b + 1]:6.1f}]  mean true distance {s.true_distance[sel].mean():.3f}")
