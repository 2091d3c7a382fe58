"""QR Lyapunov exponents for torus maps, Viana maps and billiards; the Pesin entropy estimate.

Run: python3 demos/02_lyapunov_and_pesin.py
"""
import math

import numpy as np

from artifact import cocycle, maps
from artifact.billiard import geometry

rng = np.random.default_rng(0)

# %% Linear map: the exponents are logs of the eigenvalues
lin = maps.LinearEndo([[6, 1], [1, 1]])
est = cocycle.lyapunov_qr(lin, (0.1234, 0.5678), 10_000, rng)
print("linear:", est.exponents, "oracle:", np.log([(7 + math.sqrt(29)) / 2, (7 - math.sqrt(29)) / 2]))

# %% Sheared map: the shear inflates the top exponent well beyond log 5
acs = maps.default_acs_map()
est = cocycle.lyapunov_qr(acs, (0.1234, 0.5678), 100_000, rng)
print("sheared:", est.exponents, "+-", est.ci_halfwidths, " sum - log 5 =", est.exponents.sum() - math.log(5))

pes = cocycle.pesin_entropy_estimate(acs, (0.1234, 0.5678), 100_000, rng)
print("Pesin estimate log 5 + |lambda-| = %.4f +- %.4f (log 5 = %.4f)" % (pes.value, pes.ci_halfwidth, math.log(5)))

# %% Stable and unstable directions
print("stable direction at (0.2, 0.3):", cocycle.stable_direction(acs, (0.2, 0.3), 40))
br = maps.sample_preorbits(acs, (0.2, 0.3), 40, 5, rng)
dirs, change = cocycle.unstable_directions(acs, br)
print("unstable directions along five pre-orbits (they differ):\n", np.round(dirs, 4))

# %% Viana map: both exponents positive
v = maps.VianaMap.default()
est = cocycle.lyapunov_qr(v, (0.1, 0.3), 1_000_000, rng)
print("Viana:", est.exponents, "+-", est.ci_halfwidths)

# %% Billiard on the three-disc table: lambda+ = -lambda-
table = geometry.three_disc_table()
est = cocycle.lyapunov_qr(table, geometry.random_state(table, rng), 100_000, rng)
print("three-disc billiard:", est.exponents, "+-", est.ci_halfwidth)
