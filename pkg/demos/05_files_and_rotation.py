"""Dataset files, a random rotation before quantising, and the packed code file."""
# %%
import os
import tempfile

import numpy as np

from evpq import bitcode
from evpq.quantize import QuantizerConfig
from evpq.vecstore import generate_uniform_sphere, load_dataset, random_rotation, write_dataset

tmp = tempfile.mkdtemp(prefix="evpq-files-")
data = generate_uniform_sphere(seed=7, n=1000, d=64)

# %%
for fmt in ("fvecs", "raw-f32", "csv"):
    path = os.path.join(tmp, f"data.{fmt}")
    write_dataset(path, data, fmt)
    back = load_dataset(path, fmt, d=64)
    print(f"{fmt:8s} {os.path.getsize(path):8d} bytes  max abs diff {np.abs(back.vectors - data.vectors).max():.2e}")

# %% [markdown]
# A Haar-random rotation preserves distances, so it can spread energy across
# coordinates before quantising without changing the ground truth.

# %%
rot = random_rotation(seed=3, d=64)
rotated = rot.apply(data)
a, b = data.vectors[:2], rotated.vectors[:2]
print("distance before", np.linalg.norm(a[0] - a[1]), "after", np.linalg.norm(b[0] - b[1]))

# %%
codes = QuantizerConfig("evp").encode(rotated)
path = os.path.join(tmp, "data.evpb")
bitcode.write_codes(path, codes)
loaded = bitcode.read_codes(path)
print("code file", os.path.getsize(path), "bytes; rows", len(loaded), "x", loaded.x,
      "identical", np.array_equal(loaded.plus, codes.plus) and np.array_equal(loaded.minus, codes.minus))
