"""Periodic orbits of the three-disc table and the equal-expansion report.

Run: python3 demos/05_periodic_orbits.py   (about 10 s)
"""
from artifact.billiard import geometry as geo, orbits as orb

table = geo.three_disc_table()

# %% Symbols: scatterer copies reachable along a clear centre line
trans = orb.transitions(table, max_gap=0.25)
for d, syms in trans.items():
    print("disc", d, "->", syms)

# %% Solve every canonical itinerary up to period 6
db = orb.enumerate_orbits(table, 6, max_gap=0.25)
print({p: len(v) for p, v in sorted(db.by_period().items())}, "orbits;", len(db.failures), "itineraries rejected")
for o in db.by_period()[2]:
    print("  %-22s rate %.6f  min angle gap %.4f" % (o.itinerary, o.expansion_rate, o.min_angle_gap))

# %% Symmetry classes and the report
rep = orb.mme_criterion_report(table, 6, db=db)
print("rates in [%.4f, %.4f], spread %.4f, class spread %.1e" % (rep.min_rate, rep.max_rate, rep.spread,
                                                                 rep.class_spread))
print("orbit-growth proxy %.4f; verdict: %s" % (rep.entropy_proxy, rep.verdict))
