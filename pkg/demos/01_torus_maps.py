"""Torus endomorphisms, their preimages, and the sheared map used in the experiments.

Run: python3 demos/01_torus_maps.py
"""
import numpy as np

from artifact import maps

# %% A linear endomorphism of degree 5
E = [[6, 1], [1, 1]]
lin = maps.LinearEndo(E)
print("E =", E, "det =", maps.int_det(E))
print("Hermite normal form:\n", maps.hermite_normal_form(E))
print("coset representatives:", maps.coset_representatives(E).tolist())

p = np.array([0.5, 0.5])
print("f(0.5, 0.5) =", lin.apply(p))

ys = lin.preimages(p)
print("preimages of (0.5, 0.5):")
for y in ys:
    print("   ", y, "->", lin.apply(y))

# %% The sheared map f = E o h_t, h_t(x, y) = (x, y + t sin 2 pi x)
acs = maps.default_acs_map()
print("\n", acs)
rep = maps.validate_acs_matrix(E)
print("matrix conditions:", rep)

x = np.array([0.1, 0.7])
ys = acs.preimages(x)
w = 1.0 / np.abs(np.linalg.det(acs.jacobian(ys)))
print("transfer-operator check, sum of 1/|det df| over preimages:", w.sum())

# every preimage branch sees a different derivative, unlike the linear map
for y in ys:
    print("   branch at", np.round(y, 4), "||df^-1|| =", np.linalg.norm(np.linalg.inv(acs.jacobian(y)), 2).round(4))

# %% Backward random walk: a sample from the fibre measure over x
rng = np.random.default_rng(1)
po = maps.sample_preorbit(acs, x, 10, rng)
print("\npre-orbit of depth", po.depth, "with weight", po.weight)
print(np.round(po.branch, 4))

# %% A Viana skew product
v = maps.VianaMap.default()
print("\nViana map: a0 = %.16f, trapping interval" % v.a0, np.round(v.I0, 5),
      "margin %.4f" % v.invariant_margin())
print("number of preimages of (0.37, 0.1):", len(maps.viana_preimages(v, (0.37, 0.1))))
