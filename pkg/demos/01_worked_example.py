"""A ten-dimensional walk through quantisation, bit planes and the plane dot products."""
# %%
import numpy as np

from evpq import bitcode
from evpq.quantize import EvpConfig, evp_quantize, log10_vertex_count, select_x

u1 = np.array([0.3, 0.1, -0.4, 0.2, -0.05, 0.9, 0.0, -0.7, 0.15, 0.25])
u2 = np.array([-0.2, -0.6, 0.5, 0.8, 0.1, 0.0, -0.3, 0.05, 0.4, -0.1])

# %% [markdown]
# With d = 10 the vertex count C(d, x) * 2**x peaks at x = round(2d/3).

# %%
for x in range(1, 11):
    print(f"x={x:2d}  log10 vertices={log10_vertex_count(EvpConfig(10, x)):.3f}")
print("select_x(10) =", select_x(10))

# %%
cfg = EvpConfig(10, 5)
v1, v2 = evp_quantize(u1, cfg), evp_quantize(u2, cfg)
print("v1 =", v1.tolist())
print("v2 =", v2.tolist())

# %% [markdown]
# Each code becomes two bit planes: one marks the +1 positions, one marks the -1 positions.

# %%
p1, p2 = bitcode.pack(v1, x=5), bitcode.pack(v2, x=5)
for name, p in (("v1", p1), ("v2", p2)):
    plus = bitcode.unpack_bits(bitcode.PackedBinary(p.plus, 10)).astype(int)
    minus = bitcode.unpack_bits(bitcode.PackedBinary(p.minus, 10)).astype(int)
    print(f"{name}+ {plus.tolist()}  {name}- {minus.tolist()}  padded to {p.padded_bits} bits")

# %%
print("b2sp(v1, v2)       =", bitcode.b2sp(p1, p2))
print("integer dot        =", int(v1.astype(int) @ v2.astype(int)))
print("masked add (v1, u2) =", round(bitcode.masked_add_sp(p1, u2), 6))
print("float dot (v1, u2)  =", round(float(v1 @ u2), 6))

# %%
h1, h2 = bitcode.pack_bits(u1 > 0), bitcode.pack_bits(u2 > 0)
print("1-bit Hamming      =", bitcode.hamming(h1, h2))
