"""k@n recall: how many true neighbours land in the proxy's top n, then exact re-ranking."""
# %%
import os

import numpy as np

from evpq.quantize import QuantizerConfig
from evpq.search import exact_knn, ground_truth, proxy_knn, rerank, run_recall_experiment
from evpq.vecstore import generate_uniform_sphere

N, D, Q = int(os.environ.get("DEMO_N", 20_000)), 100, 200
data = generate_uniform_sphere(seed=1, n=N, d=D)
queries = generate_uniform_sphere(seed=2, n=Q, d=D)

# %%
truth = ground_truth(data, queries, k=30)
for kind in ("evp", "b158", "one-bit"):
    reports = run_recall_experiment(data, queries, k=30, quantizer=QuantizerConfig(kind), truth=truth)
    print(f"{kind:8s}", "  ".join(f"30@{r.n}={r.mean:.3f}" for r in reports))

# %% [markdown]
# The proxy shortlist is cheap; re-ranking it with float distances recovers the exact order.

# %%
qc = QuantizerConfig("evp")
codes, q_codes = qc.encode(data), qc.encode(queries)
q = queries.vectors[0]
shortlist = proxy_knn(codes, q_codes[0], 500)
best = rerank(shortlist, data, q, 30)
exact = exact_knn(data, q, 30)
print("overlap after rerank:", np.intersect1d(best.indices, exact.indices).size, "of 30")

# %%
r = run_recall_experiment(data, queries, k=30, ns=(100,), quantizer=qc, truth=truth)[0]
print("30@100 histogram (20 bins over [0,1]):", r.histogram().tolist())
