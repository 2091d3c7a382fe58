"""The collision map of a dispersing billiard on the torus: invariants and the zero-pressure check.

Run: python3 demos/04_billiards.py
"""
import math

import numpy as np

from artifact import cocycle
from artifact.billiard import geometry as geo, orbits as orb

table = geo.three_disc_table()
print(table)
print("tau_min = %.5f, Lambda = %.5f" % (table.tau_min, geo.min_expansion_Lambda(table)))
print(geo.finite_horizon_check(table, 20_000))

# %% A trajectory and its derivative cocycle
rng = np.random.default_rng(4)
traj = geo.trajectory(table, geo.random_state(table, rng), 10_000)
D = geo.trajectory_derivatives(table, traj)
c = np.cos(traj.phi)
print("max |det df - cos phi / cos phi'| =", np.max(np.abs(np.linalg.det(D) - c[:-1] / c[1:])))
print("flight times in [%.4f, %.4f]" % (traj.tau.min(), traj.tau.max()))

# %% Time reversal: (r, phi) -> (r, -phi) conjugates f and its inverse
s0, s1 = traj.state(100), traj.state(101)
back, _ = geo.collide(table, s1.reversed())
print("reversal:", s0, "<-", back.reversed())

# %% Geometric potential and the pressure-zero identity
print("potential at a random state: %.4f" % cocycle.geometric_potential(table, geo.random_state(table, rng)))
pc = orb.pressure_zero_check(table, 1_000_000, rng)
print("mean(-phi) = %.6f, lambda+ = %.6f, residual %.1e" % (pc.birkhoff_mean, pc.lambda_plus, pc.residual))
wrong = orb.pressure_zero_check(table, 100_000, rng, direction="stable")
print("with the stable bundle instead the residual is %.3f (about 2 lambda+)" % wrong.residual)

# %% Two discs facing each other: the diametral orbit
two = geo.two_disc_table()
o = orb.solve_orbit(two, orb.Itinerary((0, 1), ((0, 0), (0, 0))))
print("diametral rate %.12f vs log(4 + sqrt 15) = %.12f" % (o.expansion_rate, math.log(4 + math.sqrt(15))))
