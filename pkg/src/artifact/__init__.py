"""Numerical laboratory for non-uniformly hyperbolic surface maps.

Torus endomorphisms and Viana maps (:mod:`artifact.maps`), dispersing billiards
(:mod:`artifact.billiard`), derivative cocycles (:mod:`artifact.cocycle`),
preimage-tree statistics (:mod:`artifact.preimage_stats`) and finite Markov
shifts (:mod:`artifact.tms`).
"""

__version__ = "0.1.0"
