"""Lyapunov exponents, Oseledets directions, geometric potential, Pliss times."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._kernels import push_forward_normalised, qr_log_diagonals
from .billiard.geometry import (
    BilliardTable,
    CollisionState,
    NearGrazing,
    cone_bounds,
    p_norm_expansion,
    trajectory,
    trajectory_derivatives,
)
from .errors import DepthTooSmall, HypothesisViolated, NoGap, NotHyperbolic, SingularJacobian
from .maps import PreOrbit, TorusEndo, VianaMap, reduce_mod1, viana_orbit

SINGULAR_DET = 1e-14
N_BATCHES = 20


@dataclass
class LyapunovEstimate:
    exponents: np.ndarray
    n_iter: int
    ci_halfwidths: np.ndarray

    @property
    def ci_halfwidth(self) -> float:
        return float(np.max(self.ci_halfwidths))

    @property
    def top(self) -> float:
        return float(self.exponents[0])

    @property
    def bottom(self) -> float:
        return float(self.exponents[-1])


def batch_means(series, n_batches: int = N_BATCHES, level: float = 0.95):
    """Mean and confidence half-width from non-overlapping batch means."""
    series = np.asarray(series, dtype=float)
    m = len(series) // n_batches
    if m == 0:
        raise ValueError("series shorter than the number of batches")
    means = series[: m * n_batches].reshape(n_batches, m, *series.shape[1:]).mean(axis=1)
    q = stats.t.ppf(0.5 + level / 2, n_batches - 1)
    half = q * means.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return series.mean(axis=0), half


def orbit(m: TorusEndo, x, n: int) -> np.ndarray:
    pts = np.empty((n + 1, 2))
    pts[0] = reduce_mod1(np.asarray(x, dtype=float))
    for k in range(n):
        pts[k + 1] = m.apply(pts[k])
    return pts


def tangent_cocycle(system, start, n: int, rng: np.random.Generator) -> np.ndarray:
    """Derivative matrices along an orbit of length ``n`` of a map or billiard table.

    For Viana maps ``start = (theta0, t0)``; only the leading digits of ``theta0``
    are used, later angle digits come from ``rng`` (see :func:`viana_orbit`).
    """
    if isinstance(system, BilliardTable):
        traj = trajectory(system, start, n)
        return trajectory_derivatives(system, traj)
    if isinstance(system, VianaMap):
        pts = viana_orbit(system, start, n, rng)
        return system.jacobian(pts[:-1])
    pts = orbit(system, start, n)
    return np.ascontiguousarray(system.jacobian(pts[:-1]), dtype=float)


def random_frame(rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((2, 2)))
    return Q * np.sign(np.diag(R))


def lyapunov_qr(system, start, n: int, rng: np.random.Generator, n_transient: int = 200,
                n_batches: int = N_BATCHES) -> LyapunovEstimate:
    """Both exponents from the averaged log-diagonal of successive QR factors.

    ``n_transient`` steps are iterated before averaging so that the frame has
    aligned with the Oseledets filtration.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    mats = np.ascontiguousarray(tangent_cocycle(system, start, n + n_transient, rng))
    dets = np.abs(mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0])
    if np.any(dets < SINGULAR_DET):
        raise SingularJacobian(f"det df < {SINGULAR_DET} at step {int(np.argmax(dets < SINGULAR_DET))}")
    logs, _ = qr_log_diagonals(mats, random_frame(rng))
    mean, half = batch_means(logs[n_transient:], n_batches)
    order = np.argsort(-mean)
    return LyapunovEstimate(exponents=mean[order], n_iter=n, ci_halfwidths=half[order])


def _canonical(v):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    flip = (v[..., 0] < 0) | ((v[..., 0] == 0) & (v[..., 1] < 0))
    return np.where(flip[..., None], -v, v)


def line_angle(u, v):
    """Angle in [0, pi/2] between the lines spanned by u and v."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = np.abs(np.sum(u * v, axis=-1)) / (np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1))
    s = np.abs(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]) / (
        np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1))
    return np.arctan2(s, c)


GENERIC_VECTOR = np.array([math.cos(1.0), math.sin(1.0)])
DIRECTION_TOL = 1e-6


def unstable_directions(m: TorusEndo, branches, v0=GENERIC_VECTOR):
    """Vectorised unstable directions for pre-orbits of shape ``(M, n + 1, 2)``.

    Returns the directions at ``x_0`` and the angle between the estimates
    started at depth ``n`` and ``n - 1``.
    """
    branches = np.asarray(branches, dtype=float)
    M, n1, _ = branches.shape
    n = n1 - 1
    a = np.broadcast_to(np.asarray(v0, dtype=float), (M, 2)).copy()
    b = a.copy()
    for k in range(n, 0, -1):
        J = m.jacobian(branches[:, k])
        a = np.einsum("mij,mj->mi", J, a)
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        if k < n:
            b = np.einsum("mij,mj->mi", J, b)
            b /= np.linalg.norm(b, axis=1, keepdims=True)
    return _canonical(a), line_angle(a, b)


def unstable_direction(m: TorusEndo, preorbit: PreOrbit) -> np.ndarray:
    """Unstable direction at ``x_0`` determined by the chosen branch."""
    if preorbit.depth < 20:
        raise DepthTooSmall(f"pre-orbit depth {preorbit.depth} < 20")
    d, change = unstable_directions(m, preorbit.branch[None])
    if change[0] > DIRECTION_TOL:
        raise DepthTooSmall(f"direction still moving by {change[0]:.2e} rad at depth {preorbit.depth}")
    return d[0]


def most_contracted_direction(mats):
    """Most contracted direction of the product ``mats[-1] ... mats[0]`` and log singular gap."""
    mats = np.ascontiguousarray(mats, dtype=float)
    w = GENERIC_VECTOR.copy()
    log_inv = 0.0
    for A in mats[::-1]:
        w = np.linalg.solve(A, w)
        nw = np.linalg.norm(w)
        log_inv += math.log(nw)
        w /= nw
    # pulling back is stable numerically; pushing the contracted vector forward is not
    log_small = -log_inv
    log_det = np.sum(np.log(np.abs(np.linalg.det(mats))))
    return _canonical(w), float(log_det - 2.0 * log_small)


def stable_direction(system, x, n: int, rng: np.random.Generator | None = None, min_gap: float = 10.0):
    """Right singular direction of the ``n``-step derivative with the smaller singular value."""
    rng = rng if rng is not None else np.random.default_rng(0)
    mats = tangent_cocycle(system, x, n, rng)
    if np.any(np.abs(np.linalg.det(mats)) < SINGULAR_DET):
        raise SingularJacobian("orbit meets the critical set")
    w, gap = most_contracted_direction(mats)
    if gap < math.log(min_gap):
        raise NoGap(f"singular values within a factor {math.exp(gap):.3g}")
    return w


# ---------------------------------------------------------------- billiard potential

def _slopes(dirs):
    return dirs[:, 1] / dirs[:, 0]


def potential_along(table: BilliardTable, traj, metric: str = "p", direction: str = "unstable"):
    """Values of -log ||df|_E|| along a trajectory.

    ``direction="unstable"`` pushes the unstable cone edge forward from the
    start; ``"stable"`` pulls a vector back from the end. Early (resp. late)
    entries carry the transient and should be discarded by the caller.
    """
    D = trajectory_derivatives(table, traj)
    K = 1.0 / table.radii[traj.disc]
    c = np.cos(traj.phi)
    if direction == "unstable":
        v0 = np.array([1.0, K[0]])
        dirs, logs = push_forward_normalised(np.ascontiguousarray(D), v0)
        dirs = dirs[:-1]
    elif direction == "stable":
        Dinv = np.linalg.inv(D[::-1])
        dirs_rev, _ = push_forward_normalised(np.ascontiguousarray(Dinv), np.array([1.0, -K[-1]]))
        dirs = dirs_rev[::-1][:-1]
        img = np.einsum("kij,kj->ki", D, dirs)
        logs = np.log(np.linalg.norm(img, axis=1))
    else:
        raise ValueError("direction must be 'unstable' or 'stable'")
    if metric == "euclidean":
        return -logs
    if metric != "p":
        raise ValueError("metric must be 'p' or 'euclidean'")
    V = _slopes(dirs)
    return -np.log(p_norm_expansion(K[:-1], K[1:], traj.tau, c[:-1], V))


def geometric_potential(table: BilliardTable, state: CollisionState, depth: int = 40,
                        metric: str = "p") -> float:
    """-log of the unstable expansion at ``state``.

    The unstable direction is obtained by pushing the unstable cone edge from
    ``f^-depth(state)``; the past orbit comes from time reversal
    ``f^-1 = I f I`` with ``I(r, phi) = (r, -phi)``.
    """
    back = trajectory(table, state.reversed(), depth)
    start = CollisionState(int(back.disc[-1]), float(back.r[-1]), -float(back.phi[-1]))
    fwd = trajectory(table, start, depth + 1)
    if math.cos(fwd.phi[-1]) < 1e-12:
        raise NearGrazing("image of the state is grazing")
    return float(potential_along(table, fwd, metric)[-1])


@dataclass
class PesinEstimate:
    value: float
    ci_halfwidth: float
    lyapunov: LyapunovEstimate


def pesin_entropy_estimate(m: TorusEndo, x, n: int, rng: np.random.Generator) -> PesinEstimate:
    """``log|det E| + |lambda^-|`` for a volume-preserving torus map."""
    if not getattr(m, "volume_preserving", False):
        raise NotHyperbolic(f"{m!r} is not volume preserving")
    est = lyapunov_qr(m, x, n, rng)
    lam, half = est.bottom, float(est.ci_halfwidths[-1])
    if lam >= -half:
        raise NotHyperbolic(f"lambda^- = {lam:.4g} +- {half:.2g} does not exclude 0")
    return PesinEstimate(value=math.log(m.degree) + abs(lam), ci_halfwidth=half, lyapunov=est)


# ---------------------------------------------------------------- Pliss times

@dataclass
class PlissResult:
    times: np.ndarray
    density: float
    delta_bound: float
    hypothesis_holds: bool


def pliss_times(seq, alpha1: float, alpha2: float, epsilon: float) -> PlissResult:
    """Indices from which every forward average up to the window end is at most ``alpha2 + epsilon``.

    For a window of length L the candidates are 0..L-1 and ``density = count / L``.
    When all entries exceed ``alpha1`` and the window average is at most
    ``alpha2``, the density exceeds ``epsilon / (alpha2 + epsilon - alpha1)``.
    """
    a = np.asarray(seq, dtype=float)
    if not alpha1 < alpha2:
        raise ValueError("alpha1 must be smaller than alpha2")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if np.any(a <= alpha1):
        raise ValueError("every entry must exceed alpha1")
    L = len(a)
    delta = epsilon / (alpha2 + epsilon - alpha1)
    # rounding slack so that a sequence averaging exactly alpha2 counts as satisfying the bound
    holds = bool(a.sum() - alpha2 * L <= 1e-12 * (np.abs(a).sum() + 1.0))
    if not holds:
        warnings.warn(f"window average {a.mean():.4g} exceeds alpha2={alpha2}", HypothesisViolated, stacklevel=2)
    # k qualifies iff G(k) >= G(n) for all n > k, with G the shifted partial sums
    G = np.concatenate([[0.0], np.cumsum(a - (alpha2 + epsilon))])
    suffix_max = np.maximum.accumulate(G[::-1])[::-1]
    times = np.flatnonzero(G[:-1] >= suffix_max[1:])
    return PlissResult(times=times, density=len(times) / L if L else 0.0, delta_bound=delta,
                       hypothesis_holds=holds)


def z_chi_test(seq, chi: float, N: int) -> bool:
    """Partial sums of log-expansion rates stay below ``-n chi / 2`` for 1 <= n <= N."""
    a = np.asarray(seq, dtype=float)[:N]
    if len(a) < N:
        raise ValueError("sequence shorter than N")
    n = np.arange(1, N + 1)
    return bool(np.all(np.cumsum(a) < -n * chi / 2.0))


def z_chi_fraction(sequences, chi: float, N: int, level: float = 0.95):
    """Fraction of sequences passing :func:`z_chi_test` and its Wilson interval."""
    hits = sum(z_chi_test(s, chi, N) for s in sequences)
    n = len(sequences)
    z = stats.norm.ppf(0.5 + level / 2)
    p = hits / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    return p, (centre - half, centre + half)


def contracting_log_rates(m: TorusEndo, x, n: int, lookahead: int = 40) -> np.ndarray:
    """``log ||df|_{E^s}||`` along the first ``n`` orbit points of ``x``.

    ``E^s`` at each point is the most contracted direction over the next
    ``lookahead`` steps; the resulting sequence can be fed to :func:`z_chi_test`.
    """
    pts = orbit(m, x, n + lookahead)
    J = m.jacobian(pts[:-1])
    w = GENERIC_VECTOR.copy()
    dirs = np.empty((n + lookahead, 2))
    for k in range(n + lookahead - 1, -1, -1):
        w = np.linalg.solve(J[k], w)
        w /= np.linalg.norm(w)
        dirs[k] = w
    img = np.einsum("kij,kj->ki", J[:n], dirs[:n])
    return np.log(np.linalg.norm(img, axis=1))
