"""Finite Markov shifts: components, period, entropy, the Parry measure and entropy ladders.

Run: python3 demos/06_markov_shifts.py
"""
import math

from artifact import tms

g = tms.MarkovGraph(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 3), (3, 4), (4, 3), (4, 4), (5, 0)])
for comp in tms.irreducible_components(g):
    per = tms.period(g, comp)
    print("component", comp, "period", per.period, "classes", per.classes,
          "entropy %.6f" % tms.gurevich_entropy(g, comp))

gm = tms.golden_mean()
pm = tms.parry_mme(gm, (0, 1))
print("\ngolden mean: entropy %.12f, log golden ratio %.12f" % (pm.entropy, math.log((1 + math.sqrt(5)) / 2)))
print("Parry transitions:\n", pm.transitions)
print("stationary:", pm.stationary, "residual", pm.stationarity_residual())

print("\nrenewal ladder:", [round(h, 6) for h in tms.entropy_ladder([tms.renewal_graph(L) for L in range(1, 13)])])
print("log 2 =", round(math.log(2), 6))
