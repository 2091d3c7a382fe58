"""Dispersing billiards with disc scatterers on the unit torus.

Phase coordinates follow Chernov-Markarian: ``r`` is arclength measured
clockwise along the scatterer, ``phi`` the angle between the outgoing velocity
and the normal pointing into the table. With these conventions the one-step
derivative has the familiar negative-entry form and the unstable cone is
``K <= dphi/dr <= K + cos(phi)/tau_prev``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import ConfigError, GrazingInput, HorizonExceeded, InvalidTable, NearGrazing

HALF_PI = 0.5 * math.pi
DISC_GUARD = 1e-14
GRAZE_DELTA = 1e-6
COS_FLOOR = 1e-12


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius


@dataclass(frozen=True)
class CollisionState:
    disc: int
    r: float
    phi: float

    def reversed(self) -> "CollisionState":
        return CollisionState(self.disc, self.r, -self.phi)


class BilliardTable:
    """Disjoint discs on R^2/Z^2 and a bound ``tau_max`` on free flights.

    ``horizon_certified`` is only set by :func:`certify_horizon`.
    """

    def __init__(self, discs, tau_max: float, horizon_certified: bool = False):
        discs = [d if isinstance(d, Disc) else Disc(tuple(d[0]), float(d[1])) for d in discs]
        if not discs:
            raise InvalidTable("a table needs at least one scatterer")
        if tau_max <= 0:
            raise InvalidTable("tau_max must be positive")
        self.discs = tuple(Disc(tuple(float(c) % 1.0 for c in d.center), float(d.radius)) for d in discs)
        self.tau_max = float(tau_max)
        self.horizon_certified = horizon_certified
        self.centers = np.array([d.center for d in self.discs], dtype=float)
        self.radii = np.array([d.radius for d in self.discs], dtype=float)
        if np.any(self.radii <= 0):
            raise InvalidTable("radii must be positive")
        self.gap_min = _min_gap(self.centers, self.radii)
        if self.gap_min <= 0:
            raise InvalidTable(f"scatterers overlap (minimal gap {self.gap_min:.3g})")
        self.K_min = float(1.0 / self.radii.max())
        self.K_max = float(1.0 / self.radii.min())

    def __repr__(self):
        body = ", ".join(f"({d.center[0]:.6g}, {d.center[1]:.6g}; R={d.radius:.6g})" for d in self.discs)
        return f"BilliardTable([{body}], tau_max={self.tau_max})"

    @property
    def n_discs(self) -> int:
        return len(self.discs)

    @property
    def tau_min(self) -> float:
        """Shortest free flight; for discs it is the smallest gap between scatterers."""
        return self.gap_min

    def curvature(self, disc):
        return 1.0 / self.radii[disc]

    def position(self, disc, r):
        """Point on the scatterer boundary and the unit normal into the table."""
        R = np.asarray(self.radii[disc])
        theta = -np.asarray(r) / R
        n = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return self.centers[disc] + R[..., None] * n, n

    def phase_to_ray(self, state: CollisionState):
        p, n = self.position(state.disc, state.r)
        c, s = math.cos(state.phi), -math.sin(state.phi)
        v = np.array([c * n[0] - s * n[1], s * n[0] + c * n[1]])
        return p, v


def _min_gap(centers, radii) -> float:
    gap = math.inf
    n = len(radii)
    for i in range(n):
        for j in range(i, n):
            d = centers[j] - centers[i]
            d = d - np.round(d)
            for sx in (-1, 0, 1):
                for sy in (-1, 0, 1):
                    if i == j and sx == 0 and sy == 0:
                        continue
                    dist = math.hypot(d[0] + sx, d[1] + sy)
                    gap = min(gap, dist - radii[i] - radii[j])
    return gap


# ---------------------------------------------------------------- compiled kernels

@njit(cache=True)
def _first_hit(px, py, vx, vy, cx, cy, rad, search):
    """Earliest entry of the ray p + t v (t > 0) into a translated disc.

    Returns (t, disc, Cx, Cy); t = inf when nothing is hit within ``search``.
    """
    fx = math.floor(px)
    fy = math.floor(py)
    px -= fx
    py -= fy
    rmax = 0.0
    for j in range(rad.shape[0]):
        rmax = max(rmax, rad[j])
    kmax = int(math.ceil(search + rmax)) + 1
    best = math.inf
    bj = -1
    bcx = 0.0
    bcy = 0.0
    for k in range(kmax + 1):
        for sx in range(-k, k + 1):
            for sy in range(-k, k + 1):
                if max(abs(sx), abs(sy)) != k:
                    continue
                for j in range(rad.shape[0]):
                    Cx = cx[j] + sx
                    Cy = cy[j] + sy
                    wx = px - Cx
                    wy = py - Cy
                    b = vx * wx + vy * wy
                    if b >= 0.0:
                        continue
                    cc = wx * wx + wy * wy - rad[j] * rad[j]
                    disc = b * b - cc
                    if disc <= DISC_GUARD:
                        continue
                    t = -b - math.sqrt(disc)
                    if t > 1e-10 and t < best:
                        best = t
                        bj = j
                        bcx = Cx + fx
                        bcy = Cy + fy
        if best <= k - rmax:
            break
    if best > search:
        return math.inf, -1, 0.0, 0.0
    return best, bj, bcx, bcy


@njit(cache=True)
def _ray_of(disc, r, phi, cx, cy, rad):
    R = rad[disc]
    th = -r / R
    nx = math.cos(th)
    ny = math.sin(th)
    # positive phi turns the velocity clockwise from the normal
    c = math.cos(phi)
    s = -math.sin(phi)
    return cx[disc] + R * nx, cy[disc] + R * ny, c * nx - s * ny, s * nx + c * ny


@njit(cache=True)
def _phase_of(j, qx, qy, Cx, Cy, vx, vy, rad):
    R = rad[j]
    nx = (qx - Cx) / R
    ny = (qy - Cy) / R
    vn = vx * nx + vy * ny
    # elastic reflection
    wx = vx - 2.0 * vn * nx
    wy = vy - 2.0 * vn * ny
    th = math.atan2(ny, nx)
    r = (-th * R) % (2.0 * math.pi * R)
    phi = -math.atan2(nx * wy - ny * wx, nx * wx + ny * wy)
    return r, phi


@njit(cache=True)
def _trajectory(disc0, r0, phi0, n, cx, cy, rad, tau_max):
    discs = np.empty(n + 1, dtype=np.int64)
    rs = np.empty(n + 1)
    phis = np.empty(n + 1)
    taus = np.empty(n)
    discs[0] = disc0
    rs[0] = r0
    phis[0] = phi0
    d = disc0
    r = r0
    phi = phi0
    for k in range(n):
        if abs(phi) >= 0.5 * math.pi:
            return discs, rs, phis, taus, k, 1
        px, py, vx, vy = _ray_of(d, r, phi, cx, cy, rad)
        t, j, Cx, Cy = _first_hit(px, py, vx, vy, cx, cy, rad, tau_max)
        if j < 0:
            return discs, rs, phis, taus, k, 2
        r, phi = _phase_of(j, px + t * vx, py + t * vy, Cx, Cy, vx, vy, rad)
        d = j
        discs[k + 1] = d
        rs[k + 1] = r
        phis[k + 1] = phi
        taus[k] = t
    return discs, rs, phis, taus, n, 0


# ---------------------------------------------------------------- public operations

@dataclass
class Trajectory:
    disc: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    tau: np.ndarray

    def __len__(self):
        return len(self.tau)

    def state(self, k) -> CollisionState:
        return CollisionState(int(self.disc[k]), float(self.r[k]), float(self.phi[k]))


def collide(table: BilliardTable, state: CollisionState):
    """Next collision and the flight time to it."""
    if abs(state.phi) >= HALF_PI:
        raise GrazingInput(f"grazing state {state}")
    px, py, vx, vy = _ray_of(state.disc, state.r, state.phi, table.centers[:, 0], table.centers[:, 1], table.radii)
    t, j, Cx, Cy = _first_hit(px, py, vx, vy, table.centers[:, 0], table.centers[:, 1], table.radii, table.tau_max)
    if j < 0:
        raise HorizonExceeded(f"no scatterer within tau_max={table.tau_max} from {state}")
    r, phi = _phase_of(j, px + t * vx, py + t * vy, Cx, Cy, vx, vy, table.radii)
    return CollisionState(int(j), float(r), float(phi)), float(t)


def trajectory(table: BilliardTable, state: CollisionState, n: int) -> Trajectory:
    discs, rs, phis, taus, done, code = _trajectory(
        state.disc, state.r, state.phi, n, table.centers[:, 0], table.centers[:, 1], table.radii, table.tau_max)
    if code == 1:
        raise GrazingInput(f"grazing collision reached at step {done}")
    if code == 2:
        raise HorizonExceeded(f"free flight longer than tau_max={table.tau_max} at step {done}")
    return Trajectory(discs, rs, phis, taus)


def random_state(table: BilliardTable, rng: np.random.Generator) -> CollisionState:
    """Point drawn from the invariant measure proportional to cos(phi) dr dphi."""
    perims = 2 * np.pi * table.radii
    d = int(rng.choice(table.n_discs, p=perims / perims.sum()))
    r = float(rng.uniform(0, perims[d]))
    phi = float(np.arcsin(rng.uniform(-1.0, 1.0)))
    return CollisionState(d, r, phi)


def derivative_matrices(K, Kn, tau, cphi, cphin):
    """Vectorised one-step derivatives d(r', phi')/d(r, phi)."""
    K, Kn, tau, cphi, cphin = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (K, Kn, tau, cphi, cphin)))
    D = np.empty(K.shape + (2, 2))
    D[..., 0, 0] = -(tau * K + cphi) / cphin
    D[..., 0, 1] = -tau / cphin
    D[..., 1, 0] = -(tau * K * Kn + K * cphin + Kn * cphi) / cphin
    D[..., 1, 1] = -(tau * Kn + cphin) / cphin
    return D


def derivative(table: BilliardTable, state: CollisionState, nxt: CollisionState, tau: float) -> np.ndarray:
    c1 = math.cos(nxt.phi)
    if c1 < COS_FLOOR:
        raise NearGrazing(f"cos(phi') = {c1:.3g}")
    return derivative_matrices(table.curvature(state.disc), table.curvature(nxt.disc), tau,
                               math.cos(state.phi), c1)


def trajectory_derivatives(table: BilliardTable, traj: Trajectory) -> np.ndarray:
    """Derivative matrices along a trajectory, shape ``(len(traj), 2, 2)``."""
    cn = np.cos(traj.phi[1:])
    if np.any(cn < COS_FLOOR):
        raise NearGrazing("trajectory contains a near-grazing collision")
    K = 1.0 / table.radii[traj.disc]
    return derivative_matrices(K[:-1], K[1:], traj.tau, np.cos(traj.phi[:-1]), cn)


def cone_bounds(K, cphi, tau, kind: str):
    """Slope interval of the stable or unstable cone.

    The unstable cone at x uses the flight time *into* x, the stable cone the
    flight time *out of* x.
    """
    if kind == "u":
        return K, K + cphi / tau
    if kind == "s":
        return -K - cphi / tau, -K
    raise ValueError("kind must be 's' or 'u'")


def cone_membership(table: BilliardTable, state: CollisionState, slope: float, kind: str,
                    tau: float, rtol: float = 0.0) -> bool:
    lo, hi = cone_bounds(table.curvature(state.disc), math.cos(state.phi), tau, kind)
    slack = rtol * max(abs(lo), abs(hi))
    return bool(lo - slack <= slope <= hi + slack)


def min_expansion_Lambda(table: BilliardTable) -> float:
    if table.n_discs < 2:
        raise InvalidTable("minimum expansion needs at least two scatterers")
    return 1.0 + 2.0 * table.tau_min * table.K_min


def p_norm_expansion(K, Kn, tau, cphi, slope):
    """Growth of ``cos(phi)|dr|`` for a vector of slope ``dphi/dr`` (any cone vector)."""
    return np.abs(tau * (K + slope) + cphi) / cphi


def singularity_distance(table: BilliardTable, state: CollisionState) -> float:
    """Angle-gap proxy for the distance to the singular set S0 U f^-1(S0).

    Ignores the r-component of the metric; a diagnostic, not a metric distance.
    """
    gap = HALF_PI - abs(state.phi)
    if gap <= 0:
        return 0.0
    try:
        nxt, _ = collide(table, state)
    except HorizonExceeded:
        return gap
    return float(min(gap, HALF_PI - abs(nxt.phi)))


def angle_gaps(traj: Trajectory) -> np.ndarray:
    """:func:`singularity_distance` along a trajectory (all but its last point)."""
    g = HALF_PI - np.abs(traj.phi)
    return np.minimum(g[:-1], g[1:])


@dataclass
class HorizonReport:
    passes: bool
    worst_free_path: float
    tau_max: float
    n_rays: int


def finite_horizon_check(table: BilliardTable, n_rays: int = 10_000, search: float | None = None) -> HorizonReport:
    """Ray-casting heuristic: longest free path over a grid of boundary points and angles."""
    if n_rays < 1000:
        raise ConfigError("n_rays must be at least 1000")
    search = search if search is not None else max(20.0, 4.0 * table.tau_max)
    worst = _worst_free_path(table.centers[:, 0].copy(), table.centers[:, 1].copy(), table.radii.copy(),
                             int(n_rays), float(search))
    return HorizonReport(passes=bool(worst <= table.tau_max), worst_free_path=float(worst),
                         tau_max=table.tau_max, n_rays=int(n_rays))


@njit(cache=True)
def _worst_free_path(cx, cy, rad, n_rays, search):
    nd = rad.shape[0]
    per_disc = max(1, n_rays // nd)
    n_ang = max(2, int(math.sqrt(per_disc)))
    n_pos = max(1, per_disc // n_ang)
    worst = 0.0
    for j in range(nd):
        per = 2.0 * math.pi * rad[j]
        for a in range(n_pos):
            r = per * (a + 0.5) / n_pos
            for b in range(n_ang):
                phi = -0.5 * math.pi + math.pi * (b + 0.5) / n_ang
                px, py, vx, vy = _ray_of(j, r, phi, cx, cy, rad)
                t, hit, Cx, Cy = _first_hit(px, py, vx, vy, cx, cy, rad, search)
                if t > worst:
                    worst = t
    return worst


def certify_horizon(table: BilliardTable, n_rays: int = 100_000) -> BilliardTable:
    report = finite_horizon_check(table, n_rays)
    if not report.passes:
        raise HorizonExceeded(f"free path {report.worst_free_path:.4g} exceeds tau_max={table.tau_max}")
    return BilliardTable(table.discs, table.tau_max, horizon_certified=True)


# ---------------------------------------------------------------- shipped tables

EQUILATERAL_H = 1.0 - math.sqrt(3.0) / 2.0
THREE_DISC_RADIUS = 0.253
THREE_DISC_TAU_MAX = 2.0


def three_disc_table(radius: float = THREE_DISC_RADIUS, tau_max: float = THREE_DISC_TAU_MAX) -> BilliardTable:
    """Three equal discs at mutual distance sqrt(2 - sqrt 3), symmetric under x <-> y."""
    h = EQUILATERAL_H
    centers = [(0.25, 0.25), (0.75, 0.25 + h), (0.25 + h, 0.75)]
    return BilliardTable([Disc(c, radius) for c in centers], tau_max)


def two_disc_table(radius: float = 0.1, tau_max: float = 2.0) -> BilliardTable:
    return BilliardTable([Disc((0.25, 0.25), radius), Disc((0.75, 0.25), radius)], tau_max)


_TABLE_KEYS = {"discs", "tau_max", "name"}


def table_from_config(cfg: dict) -> BilliardTable:
    extra = set(cfg) - _TABLE_KEYS
    if extra:
        raise ConfigError(f"unknown table keys: {sorted(extra)}")
    try:
        discs = [Disc(tuple(d["center"]), float(d["radius"])) for d in cfg["discs"]]
        return BilliardTable(discs, float(cfg["tau_max"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed table config: {exc}") from None
    except InvalidTable as exc:
        raise ConfigError(str(exc)) from None
