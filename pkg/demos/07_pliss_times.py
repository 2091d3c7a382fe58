"""Pliss times of a sequence and the density lower bound.

Run: python3 demos/07_pliss_times.py
"""
import numpy as np

from artifact import cocycle, maps

rng = np.random.default_rng(7)
seq = np.clip(rng.normal(-0.2, 0.8, 300), -2.9, None)
res = cocycle.pliss_times(seq, alpha1=-3.0, alpha2=0.0, epsilon=0.2)
print("%d Pliss times out of %d, density %.3f >= bound %.3f" % (len(res.times), len(seq), res.density,
                                                                 res.delta_bound))
print("first few:", res.times[:10])

# %% Contracting rates along an orbit of the sheared map feed the Z_chi test
acs = maps.default_acs_map()
rates = cocycle.contracting_log_rates(acs, (0.3, 0.4), 200)
print("mean contracting log rate %.4f" % rates.mean())
starts = [cocycle.contracting_log_rates(acs, rng.random(2), 20) for _ in range(200)]
p, ci = cocycle.z_chi_fraction(starts, chi=0.5, N=20)
print("fraction of points passing Z_chi(0.5, 20): %.3f, 95%% CI (%.3f, %.3f)" % (p, *ci))
