"""Periodic orbits of dispersing billiards and the equal-expansion report.

An itinerary is a cyclic word of symbols ``(disc, shift)``: chord ``i`` runs from
scatterer ``d_i`` to the copy of scatterer ``d_{i+1}`` translated by the integer
vector ``shift_i`` (relative to the copy carrying ``d_i``). Periodic orbits are
critical points of the total chord length; for dispersing scatterers they are
non-degenerate minima, so Newton's method on the boundary angles converges
quadratically from the centre-line seed.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoConvergence, Occluded
from .geometry import (
    GRAZE_DELTA,
    HALF_PI,
    BilliardTable,
    CollisionState,
    collide,
    derivative_matrices,
    min_expansion_Lambda,
)

GRAD_TOL = 1e-12
MAX_NEWTON = 100
REFLECT_TOL = 1e-9
DEDUPE_RES = 1e-7
DEFAULT_MAX_PERIOD = 8


@dataclass(frozen=True)
class Itinerary:
    discs: tuple
    shifts: tuple

    def __post_init__(self):
        if len(self.discs) != len(self.shifts) or not self.discs:
            raise ValueError("itinerary needs one shift per disc")
        object.__setattr__(self, "discs", tuple(int(d) for d in self.discs))
        object.__setattr__(self, "shifts", tuple((int(s[0]), int(s[1])) for s in self.shifts))
        for i, (d, s) in enumerate(zip(self.discs, self.shifts)):
            if self.discs[(i + 1) % len(self)] == d and s == (0, 0):
                raise ValueError("a chord cannot start and end on the same scatterer copy")

    def __len__(self):
        return len(self.discs)

    @property
    def symbols(self):
        return tuple(zip(self.discs, self.shifts))

    def rotated(self, k: int) -> "Itinerary":
        k %= len(self)
        return Itinerary(self.discs[k:] + self.discs[:k], self.shifts[k:] + self.shifts[:k])

    def reversed(self) -> "Itinerary":
        p = len(self)
        d = tuple(self.discs[p - 1 - j] for j in range(p))
        s = tuple((-self.shifts[(p - 2 - j) % p][0], -self.shifts[(p - 2 - j) % p][1]) for j in range(p))
        return Itinerary(d, s)

    def canonical(self) -> "Itinerary":
        """Smallest representative under cyclic rotation and time reversal."""
        sym = canonical_symbols(self.symbols)
        return Itinerary(tuple(d for d, _ in sym), tuple(sh for _, sh in sym))

    def is_primitive(self) -> bool:
        p = len(self)
        sym = self.symbols
        return all(sym != sym[q:] + sym[:q] for q in range(1, p) if p % q == 0)

    def __str__(self):
        return " ".join(f"{d}:{s[0]},{s[1]}" for d, s in self.symbols)

    @classmethod
    def parse(cls, text: str) -> "Itinerary":
        discs, shifts = [], []
        for tok in text.split():
            d, s = tok.split(":")
            a, b = s.split(",")
            discs.append(int(d))
            shifts.append((int(a), int(b)))
        return cls(tuple(discs), tuple(shifts))


@dataclass
class PeriodicOrbit:
    itinerary: Itinerary
    points: list
    taus: np.ndarray
    expansion_rate: float
    min_angle_gap: float
    grad_norm: float
    reflection_residual: float
    positions: np.ndarray = field(repr=False)

    @property
    def period(self) -> int:
        return len(self.points)

    @property
    def grazing(self) -> bool:
        return self.min_angle_gap <= GRAZE_DELTA

    def key(self):
        """Rounded multiset of (disc, r) used for deduplication."""
        return tuple(sorted((s.disc, round(s.r / DEDUPE_RES)) for s in self.points))


# ---------------------------------------------------------------- length functional

def _copy_centres(table: BilliardTable, it: Itinerary) -> np.ndarray:
    """Centres of the scatterer copies visited, with the closing copy appended."""
    c = table.centers
    out = np.empty((len(it) + 1, 2))
    out[0] = c[it.discs[0]]
    for i in range(len(it)):
        nxt = it.discs[(i + 1) % len(it)]
        out[i + 1] = out[i] - c[it.discs[i]] + c[nxt] + np.array(it.shifts[i], dtype=float)
    return out


def _chords(centres, R, theta):
    """Boundary points, unit chords, lengths; ``theta`` has the p angles."""
    th = np.append(theta, theta[0])
    n = np.stack([np.cos(th), np.sin(th)], axis=-1)
    P = centres + R[:, None] * n
    d = P[1:] - P[:-1]
    ell = np.linalg.norm(d, axis=1)
    return P, n, d / ell[:, None], ell


def length_gradient_hessian(centres, R, theta):
    """Total length, gradient and Hessian in the boundary angles."""
    p = len(theta)
    P, n, u, ell = _chords(centres, R, theta)
    t = np.stack([-n[:, 1], n[:, 0]], axis=-1) * R[:, None]
    g = np.empty(p)
    H = np.zeros((p, p))
    for i in range(p):
        # chord i-1 ends at point i, chord i starts there
        gi = u[i - 1] if i > 0 else u[p - 1]
        force = gi - u[i]
        g[i] = force @ t[i]
        H[i, i] += -force @ (R[i] * n[i])
    for c in range(p):
        a, b = c, (c + 1) % p
        Q = (np.eye(2) - np.outer(u[c], u[c])) / ell[c]
        ta = t[c]
        tb = t[c + 1]
        H[a, a] += ta @ Q @ ta
        H[b, b] += tb @ Q @ tb
        H[a, b] -= ta @ Q @ tb
        H[b, a] -= tb @ Q @ ta
    return float(ell.sum()), g, H


def _seed(centres):
    p = len(centres) - 1
    theta = np.empty(p)
    for i in range(p):
        prev = centres[i - 1] if i > 0 else centres[p - 1] - (centres[p] - centres[0])
        a = centres[i + 1] - centres[i]
        b = prev - centres[i]
        v = a / np.linalg.norm(a) + b / np.linalg.norm(b)
        if np.linalg.norm(v) < 1e-12:
            v = a
        theta[i] = math.atan2(v[1], v[0])
    return theta


def _occlusion(table: BilliardTable, P, ends, radius_of):
    """Smallest clearance of the chords from scatterer copies other than their endpoints."""
    worst = math.inf
    C, Rs = table.centers, table.radii
    for k in range(len(P) - 1):
        a, b = P[k], P[k + 1]
        d = b - a
        L2 = d @ d
        lo = np.floor(np.minimum(a, b) - 1.0)
        hi = np.ceil(np.maximum(a, b) + 1.0)
        for sx in range(int(lo[0]), int(hi[0]) + 1):
            for sy in range(int(lo[1]), int(hi[1]) + 1):
                cc = C + np.array([sx, sy], dtype=float)
                s = np.clip(((cc - a) @ d) / L2, 0.0, 1.0)
                dist = np.linalg.norm(a + s[:, None] * d - cc, axis=1) - Rs
                for j in range(len(Rs)):
                    if np.allclose(cc[j], ends[k], atol=1e-9) or np.allclose(cc[j], ends[k + 1], atol=1e-9):
                        continue
                    worst = min(worst, dist[j])
    return worst


def solve_orbit(table: BilliardTable, itinerary: Itinerary, max_steps: int = MAX_NEWTON) -> PeriodicOrbit:
    """Newton iteration on the gradient of the cyclic length functional.

    Steps are damped by halving until the length decreases. At convergence the
    elastic law, the outward direction of every chord and obstacle-freeness are
    verified.
    """
    it = itinerary
    p = len(it)
    centres = _copy_centres(table, it)
    R = table.radii[np.append(it.discs, it.discs[0])]
    theta = _seed(centres)
    Lval, g, H = length_gradient_hessian(centres, R, theta)
    for _ in range(max_steps):
        if np.max(np.abs(g)) < GRAD_TOL:
            break
        try:
            w, V = np.linalg.eigh(H)
        except np.linalg.LinAlgError:
            raise NoConvergence(f"singular Hessian for {it}") from None
        # positive-definite modification keeps the step a descent direction
        w = np.maximum(np.abs(w), 1e-8)
        step = -V @ ((V.T @ g) / w)
        lam = 1.0
        while True:
            cand = theta + lam * step
            Lc, gc, Hc = length_gradient_hessian(centres, R, cand)
            if Lc <= Lval + 1e-15 or lam < 1e-10:
                break
            lam *= 0.5
        theta, Lval, g, H = cand, Lc, gc, Hc
    else:
        raise NoConvergence(f"{it}: gradient {np.max(np.abs(g)):.2e} after {max_steps} steps")
    if np.max(np.abs(g)) >= GRAD_TOL:
        raise NoConvergence(f"{it}: gradient {np.max(np.abs(g)):.2e}")

    P, n, u, ell = _chords(centres, R, theta)
    # chords must leave and enter their scatterers from outside
    out_ok = np.all(np.sum(u * n[:-1], axis=1) > 0) and np.all(np.sum(u * n[1:], axis=1) < 0)
    if not out_ok:
        raise Occluded(f"{it}: a chord passes through its own scatterer")
    if _occlusion(table, P, centres, R) < 0:
        raise Occluded(f"{it}: a chord crosses another scatterer")
    incoming = np.vstack([u[-1], u[:-1]])
    reflected = incoming - 2 * np.sum(incoming * n[:-1], axis=1)[:, None] * n[:-1]
    refl = float(np.max(np.abs(reflected - u)))
    if refl > REFLECT_TOL:
        raise NoConvergence(f"{it}: reflection residual {refl:.2e}")

    nn = n[:-1]
    phi = -np.arctan2(nn[:, 0] * u[:, 1] - nn[:, 1] * u[:, 0], np.sum(nn * u, axis=1))
    r = np.mod(-theta * R[:-1], 2 * np.pi * R[:-1])
    states = [CollisionState(int(d), float(rr), float(ph)) for d, rr, ph in zip(it.discs, r, phi)]
    K = 1.0 / R
    cph = np.cos(np.append(phi, phi[0]))
    D = derivative_matrices(K[:-1], K[1:], ell, cph[:-1], cph[1:])
    M = np.eye(2)
    for Di in D:
        M = Di @ M
    lam_max = np.max(np.abs(np.linalg.eigvals(M)))
    return PeriodicOrbit(
        itinerary=it, points=states, taus=ell, expansion_rate=float(math.log(lam_max) / p),
        min_angle_gap=float(np.min(HALF_PI - np.abs(phi))), grad_norm=float(np.linalg.norm(g)),
        reflection_residual=refl, positions=np.mod(P[:-1], 1.0))


def closure_residual(table: BilliardTable, orbit: PeriodicOrbit) -> float:
    """Largest mismatch between ray tracing from each point and the next point."""
    worst = 0.0
    p = orbit.period
    for i, s in enumerate(orbit.points):
        nxt, tau = collide(table, s)
        tgt = orbit.points[(i + 1) % p]
        per = 2 * math.pi * table.radii[tgt.disc]
        dr = abs((nxt.r - tgt.r + per / 2) % per - per / 2)
        err = max(dr, abs(nxt.phi - tgt.phi), abs(tau - orbit.taus[i]))
        if nxt.disc != tgt.disc:
            err = math.inf
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------- enumeration

def _segment_blocked(table: BilliardTable, a, b, skip) -> bool:
    d = b - a
    L2 = d @ d
    lo = np.floor(np.minimum(a, b) - 1.0)
    hi = np.ceil(np.maximum(a, b) + 1.0)
    for sx in range(int(lo[0]), int(hi[0]) + 1):
        for sy in range(int(lo[1]), int(hi[1]) + 1):
            cc = table.centers + np.array([sx, sy], dtype=float)
            s = np.clip(((cc - a) @ d) / L2, 0.0, 1.0)
            dist = np.linalg.norm(a + s[:, None] * d - cc, axis=1) - table.radii
            for j in range(table.n_discs):
                if any(np.allclose(cc[j], q, atol=1e-9) for q in skip):
                    continue
                if dist[j] < 0:
                    return True
    return False


def transitions(table: BilliardTable, max_gap: float | None = None) -> dict:
    """Symbols reachable from each scatterer along an unobstructed centre line.

    Copies are considered up to ``max_gap`` away (surface to surface, default
    ``tau_max``). The
    alphabet restricts enumeration to itineraries that shadow centre lines; the
    Newton solver then decides which of them are billiard orbits.
    """
    out = {}
    C, Rs = table.centers, table.radii
    max_gap = table.tau_max if max_gap is None else min(max_gap, table.tau_max)
    reach = int(math.ceil(table.tau_max + 2 * Rs.max())) + 1
    for a in range(table.n_discs):
        syms = []
        for b in range(table.n_discs):
            for sx in range(-reach, reach + 1):
                for sy in range(-reach, reach + 1):
                    if a == b and sx == 0 and sy == 0:
                        continue
                    cb = C[b] + np.array([sx, sy], dtype=float)
                    dvec = cb - C[a]
                    dist = np.linalg.norm(dvec)
                    if dist - Rs[a] - Rs[b] > max_gap:
                        continue
                    e = dvec / dist
                    pa, pb = C[a] + Rs[a] * e, cb - Rs[b] * e
                    if not _segment_blocked(table, pa, pb, (C[a], cb)):
                        syms.append((b, (sx, sy)))
        out[a] = sorted(syms)
    return out


def _reverse_symbols(sym):
    p = len(sym)
    return tuple((sym[p - 1 - j][0], (-sym[(p - 2 - j) % p][1][0], -sym[(p - 2 - j) % p][1][1]))
                 for j in range(p))


def canonical_symbols(sym):
    rev = _reverse_symbols(sym)
    return min(min(q[k:] + q[:k] for k in range(len(q))) for q in (sym, rev))


def itineraries(table: BilliardTable, period: int, trans: dict | None = None) -> list:
    """Canonical primitive itineraries of exactly the given period."""
    trans = trans if trans is not None else transitions(table)
    seen = set()

    def walk(start, cur, syms):
        last = len(syms) == period - 1
        for b, s in trans[cur]:
            if last:
                if b != start:
                    continue
                sym = tuple(syms) + ((cur, s),)
                # the word is built as (disc, outgoing shift) pairs
                can = canonical_symbols(sym)
                if can not in seen and all(sym != sym[q:] + sym[:q] for q in range(1, period) if period % q == 0):
                    seen.add(can)
            else:
                walk(start, b, syms + [(cur, s)])

    for d0 in range(table.n_discs):
        walk(d0, d0, [])
    return [Itinerary(tuple(d for d, _ in sym), tuple(s for _, s in sym)) for sym in sorted(seen)]


@dataclass
class OrbitDatabase:
    orbits: list
    failures: dict

    def by_period(self):
        out = defaultdict(list)
        for o in self.orbits:
            out[o.period].append(o)
        return dict(out)


def enumerate_orbits(table: BilliardTable, max_period: int = DEFAULT_MAX_PERIOD,
                     max_gap: float | None = None) -> OrbitDatabase:
    """Solve every canonical itinerary up to ``max_period`` and deduplicate the results.

    ``max_gap`` bounds the surface distance of the scatterer copies used as symbols.
    """
    trans = transitions(table, max_gap)
    orbits, failures, keys = [], {}, set()
    for p in range(2, max_period + 1):
        for it in itineraries(table, p, trans):
            try:
                o = solve_orbit(table, it)
            except (NoConvergence, Occluded) as exc:
                failures[str(it)] = f"{type(exc).__name__}: {exc}"
                continue
            k = o.key()
            if k not in keys:
                keys.add(k)
                orbits.append(o)
    return OrbitDatabase(orbits=orbits, failures=failures)


# ---------------------------------------------------------------- symmetries

SIGNED_PERMUTATIONS = [np.array(m, dtype=float) for m in (
    ((1, 0), (0, 1)), ((-1, 0), (0, 1)), ((1, 0), (0, -1)), ((-1, 0), (0, -1)),
    ((0, 1), (1, 0)), ((0, -1), (1, 0)), ((0, 1), (-1, 0)), ((0, -1), (-1, 0)))]


def _match_disc(table, q, R):
    d = table.centers - q
    d -= np.round(d)
    hit = np.flatnonzero((np.linalg.norm(d, axis=1) < 1e-9) & (np.abs(table.radii - R) < 1e-12))
    return int(hit[0]) if len(hit) else -1


def table_symmetries(table: BilliardTable) -> list:
    """Isometries ``x -> G x + b`` of the torus permuting the scatterers."""
    out = []
    for G in SIGNED_PERMUTATIONS:
        for j in range(table.n_discs):
            b = table.centers[j] - G @ table.centers[0]
            perm = [_match_disc(table, G @ c + b, r) for c, r in zip(table.centers, table.radii)]
            if min(perm) >= 0 and len(set(perm)) == table.n_discs:
                out.append((G, b % 1.0))
    return out


def _pos_key(pos):
    p = np.round(np.mod(pos, 1.0) / DEDUPE_RES).astype(np.int64) % int(round(1 / DEDUPE_RES))
    return tuple(sorted(map(tuple, p.tolist())))


def symmetry_classes(table: BilliardTable, orbits: list) -> list:
    """Partition of orbit indices into orbits of the table's symmetry group."""
    index = {_pos_key(o.positions): i for i, o in enumerate(orbits)}
    parent = list(range(len(orbits)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for G, b in table_symmetries(table):
        for i, o in enumerate(orbits):
            j = index.get(_pos_key(o.positions @ G.T + b))
            if j is not None:
                parent[find(i)] = find(j)
    groups = defaultdict(list)
    for i in range(len(orbits)):
        groups[find(i)].append(i)
    return sorted(groups.values())


# ---------------------------------------------------------------- report

@dataclass
class MMEReport:
    rows: list
    no_data: bool
    mean_rate: float
    min_rate: float
    max_rate: float
    spread: float
    log_Lambda: float
    entropy_proxy: float
    class_spread: float
    n_failures: int
    verdict: str


def mme_criterion_report(table: BilliardTable, max_period: int = 6, max_gap: float | None = None,
                         db: OrbitDatabase | None = None) -> MMEReport:
    """Expansion rates of non-grazing periodic orbits and their spread.

    A vanishing spread is what the equal-expansion criterion for the smooth
    measure to be the measure of maximal entropy would require, with the common
    value then equal to the topological entropy. The orbit-growth number is only
    a lower-bound proxy for that entropy.
    """
    db = db if db is not None else enumerate_orbits(table, max_period, max_gap)
    good = [o for o in db.orbits if not o.grazing]
    logL = math.log(min_expansion_Lambda(table))
    if not good:
        return MMEReport([], True, math.nan, math.nan, math.nan, math.nan, logL, math.nan, math.nan,
                         len(db.failures), "no data")
    rows = [(str(o.itinerary), o.period, o.expansion_rate, o.min_angle_gap) for o in good]
    rates = np.array([o.expansion_rate for o in good])
    counts = np.bincount([o.period for o in good])
    cum = np.cumsum(counts)
    proxy = max(math.log(cum[p]) / p for p in range(1, len(cum)) if cum[p] > 0)
    classes = symmetry_classes(table, good)
    cs = max(float(np.ptp(rates[c])) for c in classes)
    spread = float(np.ptp(rates))
    verdict = ("rates coincide: consistent with the smooth measure being the MME" if spread < 1e-8
               else "rates differ: the smooth measure is not the MME")
    return MMEReport(rows, False, float(rates.mean()), float(rates.min()), float(rates.max()), spread, logL,
                     float(proxy), cs, len(db.failures), verdict)


# ---------------------------------------------------------------- zero pressure

@dataclass
class PressureCheck:
    residual: float
    birkhoff_mean: float
    lambda_plus: float
    lambda_ci: float
    n_steps: int
    skipped: int
    direction: str


def pressure_zero_check(table: BilliardTable, n_steps: int, rng: np.random.Generator,
                        direction: str = "unstable", n_transient: int = 200) -> PressureCheck:
    """``|mean(-phi) - lambda^+|`` on one orbit, with ``phi`` the geometric potential.

    The Birkhoff mean uses the p-metric potential along the pushed unstable cone
    edge; ``lambda^+`` comes from QR on the same derivative matrices. Passing
    ``direction="stable"`` evaluates the potential on the wrong bundle, which
    must produce a residual near ``2 lambda^+``.
    """
    from ..cocycle import batch_means, potential_along, random_frame
    from .._kernels import qr_log_diagonals
    from .geometry import COS_FLOOR, random_state, trajectory, trajectory_derivatives

    if n_steps < 10**5:
        raise ValueError("n_steps must be at least 1e5")
    state = random_state(table, rng)
    skipped = 0
    while True:
        traj = trajectory(table, state, n_steps + 2 * n_transient)
        bad = np.flatnonzero(np.cos(traj.phi[1:]) < COS_FLOOR)
        if len(bad) == 0:
            break
        # restart past the near-grazing collision and count it
        skipped += 1
        state = traj.state(int(bad[0]) + 2)
    phi = potential_along(table, traj, "p", direction)
    window = slice(n_transient, n_transient + n_steps)
    bm = float(np.mean(-phi[window]))
    logs, _ = qr_log_diagonals(np.ascontiguousarray(trajectory_derivatives(table, traj)), random_frame(rng))
    mean, half = batch_means(logs[window])
    lam = float(max(mean))
    return PressureCheck(residual=abs(bm - lam), birkhoff_mean=bm, lambda_plus=lam,
                         lambda_ci=float(half[int(np.argmax(mean))]), n_steps=n_steps, skipped=skipped,
                         direction=direction)
