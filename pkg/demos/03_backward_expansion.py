"""Backward expansion statistics of the sheared map over its preimage tree.

Run: python3 demos/03_backward_expansion.py
"""
import math

import numpy as np

from artifact import maps, preimage_stats as ps

acs = maps.default_acs_map()
x = np.array([0.1, 0.7])

# %% The exact tree: 5^N leaves with their inverse derivatives
tree = ps.preimage_tree(acs, x, 4)
print("leaves:", len(tree.leaves), "weights sum:", tree.weights.sum())
print("I(x, e1, f^4) =", ps.tree_functional(tree, [[1.0, 0.0]])[0])

# %% Sampled infimum of I / N over a grid of points and directions
est = ps.c_lower_estimate(acs, ps.unit_grid(20), ps.direction_fan(16), 4)
print("sampled inf of I/N at N=4: %.6f at x=%s, v angle=%.4f"
      % (est.value, est.argmin_x, math.atan2(est.argmin_v[1], est.argmin_v[0])))

lin = maps.LinearEndo([[6, 1], [1, 1]])
print("same estimate for the linear map (never positive):",
      ps.c_lower_estimate(lin, ps.unit_grid(5), ps.direction_fan(16), 4).value)

# %% Monte Carlo over sampled pre-orbits versus the exact tree
mean, se = ps.monte_carlo_functional(acs, x, (1.0, 0.0), 4, 10_000, seed=0)
print("Monte Carlo %.5f +- %.5f, exact %.5f" % (mean, se, ps.backward_functional(acs, x, (1.0, 0.0), 4)))

# %% How close does the unstable direction come to a fixed line E?
E = np.array([math.cos(2.0), math.sin(2.0)])
eta = np.geomspace(1e-4, math.pi / 2, 40)
fit = ps.angle_tail_experiment(acs, x, E, 10_000, 30, eta, seed=0)
print("tail exponent beta = %.3f, 95%% CI (%.3f, %.3f)" % (fit.beta_hat, *fit.ci))
for row in fit.plot_rows()[::8]:
    print("   log eta %.3f   log CDF %.3f" % tuple(row))

# %% s-moments decay with depth
tab = ps.moment_bound_check(acs, x, (1.0, 0.0), 0.25, [2, 3, 4, 5, 6])
print("moments:", np.round(tab.moments, 5), "rate chi_hat = %.4f" % tab.chi_hat)

# %% Hyperbolic times along sampled pre-orbits
ht = ps.hyperbolic_time_stats(acs, x, (1.0, 0.0), tab.chi_hat / 2, 0.25, 10_000, 30, seed=0)
print("n0 histogram (first 10):", ht.histogram[:10], "censored:", ht.censored)
print("tail slope %.3f, CI (%.3f, %.3f)" % (ht.tail_slope, *ht.tail_slope_ci))
