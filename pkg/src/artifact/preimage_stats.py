"""Backward-expansion statistics over preimage trees and sampled pre-orbits.

The central object is ``I(x, v, f^N)``: the mu^-_x average of
``log ||(df^N_y)^{-1} v||`` over the ``N``-th preimages ``y`` of ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .cocycle import line_angle, unstable_directions
from .errors import BudgetExceeded, DegenerateTail
from .maps import (
    _AffineQuotientEndo,
    _require_volume_preserving,
    reduce_mod1,
    sample_preorbit,
    sample_preorbits,
)
from .parallel import run_chunks

DEFAULT_BUDGET = 10**6
TAIL_FRACTION = 0.2
MIN_TAIL_SAMPLES = 50


@dataclass
class PreimageTree:
    """Leaves of the depth-``N`` preimage tree of ``root``.

    ``inverse[i]`` is ``(df^N)^{-1}`` at leaf ``i``, mapping the tangent space at the
    root to the tangent space at the leaf.
    """

    root: np.ndarray
    depth: int
    leaves: np.ndarray
    inverse: np.ndarray
    weights: np.ndarray


def _children(m, pts):
    if isinstance(m, _AffineQuotientEndo):
        return m.inverse_branch(pts[:, None, :], np.arange(m.degree)[None, :])
    return np.stack([m.preimages(p) for p in pts])


def preimage_tree(m, x, N: int, budget: int = DEFAULT_BUDGET, extended: bool = False) -> PreimageTree:
    """All ``deg^N`` preimage branches of ``x`` with their inverse derivatives and weights.

    ``extended=True`` carries the leaf coordinates in ``np.longdouble``. Forward
    iteration of a leaf amplifies its rounding error by the top singular value of
    ``df^N``, so checking ``f^N(leaf) = x`` to 1e-9 needs the extra digits.
    """
    _require_volume_preserving(m)
    if N < 0:
        raise ValueError("N must be non-negative")
    if m.degree ** N > budget:
        raise BudgetExceeded(f"{m.degree}^{N} leaves exceed the budget {budget}")
    pts = reduce_mod1(np.asarray(x, dtype=np.longdouble if extended else float))[None, :]
    B = np.eye(2)[None]
    w = np.ones(1)
    for _ in range(N):
        kids = _children(m, pts)
        J = m.jacobian(kids)
        Jinv = np.linalg.inv(J)
        B = np.einsum("mkij,mjl->mkil", Jinv, B).reshape(-1, 2, 2)
        w = (w[:, None] / np.abs(np.linalg.det(J))).reshape(-1)
        pts = kids.reshape(-1, 2)
    return PreimageTree(root=reduce_mod1(np.asarray(x, dtype=float)), depth=N, leaves=pts, inverse=B, weights=w)


def _pulled_norms(tree: PreimageTree, vs):
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    vs = vs / np.linalg.norm(vs, axis=1, keepdims=True)
    return np.linalg.norm(np.einsum("lij,vj->vli", tree.inverse, vs), axis=-1)


def tree_functional(tree: PreimageTree, vs) -> np.ndarray:
    """``I(x, v, f^N)`` for each row of ``vs`` from an existing tree."""
    return np.log(_pulled_norms(tree, vs)) @ tree.weights


def tree_moment(tree: PreimageTree, vs, s: float) -> np.ndarray:
    """mu^-_x integral of ``||(df^N)^{-1} v||^{-s}`` for each row of ``vs``."""
    return _pulled_norms(tree, vs) ** (-s) @ tree.weights


def backward_functional(m, x, v, N: int, budget: int = DEFAULT_BUDGET) -> float:
    """Exact tree value of ``I(x, v, f^N)``."""
    if N == 0:
        return 0.0
    return float(tree_functional(preimage_tree(m, x, N, budget), v)[0])


def unit_grid(n: int) -> np.ndarray:
    """Cell centres of an ``n x n`` grid on the torus."""
    g = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)


def direction_fan(k: int) -> np.ndarray:
    """``k`` unit vectors with angles ``j pi / k`` (directions are lines)."""
    a = np.pi * np.arange(k) / k
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


@dataclass
class ConditionEstimate:
    value: float
    argmin_x: np.ndarray
    argmin_v: np.ndarray
    N: int


def c_lower_estimate(m, xs, vs, N: int, budget: int = DEFAULT_BUDGET) -> ConditionEstimate:
    """Sampled infimum of ``I(x, v, f^N) / N`` over the given points and directions.

    A minimum over a finite sample: an estimate of the infimum, not a bound.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    if len(xs) == 0 or len(vs) == 0:
        raise ValueError("grid and direction fan must be nonempty")
    if N == 0:
        return ConditionEstimate(0.0, xs[0], vs[0], 0)
    best, arg = math.inf, (0, 0)
    for i, x in enumerate(xs):
        vals = tree_functional(preimage_tree(m, x, N, budget), vs) / N
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, arg = float(vals[j]), (i, j)
    return ConditionEstimate(best, xs[arg[0]], vs[arg[1]], N)


# ---------------------------------------------------------------- Monte-Carlo pre-orbits

def _branches(m, x, depth, size, rng):
    if isinstance(m, _AffineQuotientEndo):
        return sample_preorbits(m, x, depth, size, rng)
    return np.stack([sample_preorbit(m, x, depth, rng).branch for _ in range(size)])


def _pullback_logs(m, branches, v):
    """``log ||(df^n at x_{-n})^{-1} v||`` for n = 1..depth, shape ``(M, depth)``."""
    M, n1, _ = branches.shape
    w = np.broadcast_to(np.asarray(v, dtype=float) / np.linalg.norm(v), (M, 2)).copy()
    out = np.empty((M, n1 - 1))
    acc = np.zeros(M)
    for n in range(1, n1):
        J = m.jacobian(branches[:, n])
        w = np.linalg.solve(J, w[..., None])[..., 0]
        nw = np.linalg.norm(w, axis=1)
        acc += np.log(nw)
        w /= nw[:, None]
        out[:, n - 1] = acc
    return out


def _mc_logs_chunk(size, rng, m, x, v, N):
    return _pullback_logs(m, _branches(m, x, N, size, rng), v)[:, -1]


def monte_carlo_functional(m, x, v, N: int, M: int, seed: int = 0, workers: int = 1):
    """Sample mean and standard error of ``log ||(df^N)^{-1} v||`` over mu^-_x."""
    _require_volume_preserving(m)
    vals = np.concatenate(run_chunks(_mc_logs_chunk, M, seed, (m, x, v, N), workers))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M))


@dataclass
class TailFit:
    eta_grid: np.ndarray
    empirical_cdf: np.ndarray
    beta_hat: float
    A_hat: float
    ci: tuple
    n_samples: int
    angles: np.ndarray = field(repr=False)

    def plot_rows(self):
        """``(log eta, log CDF)`` rows where the CDF is positive."""
        keep = self.empirical_cdf > 0
        return np.column_stack([np.log(self.eta_grid[keep]), np.log(self.empirical_cdf[keep])])


def _angle_chunk(size, rng, m, x, E, depth):
    dirs, _ = unstable_directions(m, _branches(m, x, depth, size, rng))
    return line_angle(np.broadcast_to(E, dirs.shape), dirs)


def _loglog_fit(sorted_angles, M):
    k = max(2, int(TAIL_FRACTION * len(sorted_angles)))
    a = sorted_angles[:k]
    F = np.arange(1, k + 1) / M
    ok = a > 0
    res = stats.linregress(np.log(a[ok]), np.log(F[ok]))
    return res.slope, math.exp(res.intercept)


def angle_tail_experiment(m, x, E, M: int, depth: int, eta_grid, seed: int = 0, workers: int = 1,
                          n_boot: int = 1000) -> TailFit:
    """Distribution under mu^-_x of the angle between ``E`` and the unstable direction.

    The tail exponent is the log-log least-squares slope of the empirical CDF over
    the smallest 20% of the angles; the CI is a percentile bootstrap.
    """
    _require_volume_preserving(m)
    E = np.asarray(E, dtype=float)
    eta_grid = np.asarray(eta_grid, dtype=float)
    angles = np.concatenate(run_chunks(_angle_chunk, M, seed, (m, x, E, depth), workers))
    below = int(np.sum(angles < eta_grid.max()))
    distinct = len(np.unique(np.round(angles, 12)))
    if below < MIN_TAIL_SAMPLES or distinct < MIN_TAIL_SAMPLES:
        raise DegenerateTail(f"{below} samples below max eta, {distinct} distinct angles")
    srt = np.sort(angles)
    cdf = np.searchsorted(srt, eta_grid, side="right") / M
    beta, A = _loglog_fit(srt, M)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        boots[b] = _loglog_fit(np.sort(rng.choice(angles, M)), M)[0]
    ci = (float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975)))
    return TailFit(eta_grid=eta_grid, empirical_cdf=cdf, beta_hat=float(beta), A_hat=float(A), ci=ci,
                   n_samples=M, angles=angles)


@dataclass
class MomentTable:
    N: np.ndarray
    moments: np.ndarray
    chi_hat: float
    monotone: bool


def moment_bound_check(m, x, v, s: float, N_list, budget: int = DEFAULT_BUDGET) -> MomentTable:
    """Exact-tree s-moments ``int ||df^{-N} v||^{-s} d mu^-_x`` and their decay rate."""
    if not 0 <= s <= 0.5:
        raise ValueError("s must lie in [0, 0.5]")
    Ns = np.asarray(sorted(N_list), dtype=int)
    mom = np.array([float(tree_moment(preimage_tree(m, x, int(N), budget), v, s)[0]) for N in Ns])
    chi = -stats.linregress(Ns, np.log(mom)).slope if len(Ns) > 1 else math.nan
    return MomentTable(N=Ns, moments=mom, chi_hat=float(chi), monotone=bool(np.all(np.diff(mom) < 0)))


@dataclass
class HyperbolicTimes:
    n0: np.ndarray
    depth: int
    censored: int
    histogram: np.ndarray
    tail_frequency: np.ndarray
    tail_slope: float
    tail_slope_ci: tuple
    size_proxy: np.ndarray = field(repr=False)


def _n0_chunk(size, rng, m, x, v, chi_bar, s, depth):
    logs = _pullback_logs(m, _branches(m, x, depth, size, rng), v)
    n = np.arange(1, depth + 1)
    ok = s * logs > n * chi_bar
    # first index after the last failure
    fail_rev = np.argmax(~ok[:, ::-1], axis=1)
    any_fail = ~ok.all(axis=1)
    last_fail = np.where(any_fail, depth - fail_rev, 0)
    return last_fail + 1


def hyperbolic_time_stats(m, x, v, chi_bar: float, s: float, M: int, depth: int, seed: int = 0,
                          workers: int = 1) -> HyperbolicTimes:
    """Per sampled pre-orbit, the first ``n0`` after which ``||df^{-n} v||^{-s} < e^{-n chi_bar}``.

    Samples still failing at ``depth`` are censored and recorded as ``depth + 1``.
    ``size_proxy = exp(-chi_bar * n0)`` stands in for the unstable-manifold size.
    """
    _require_volume_preserving(m)
    n0 = np.concatenate(run_chunks(_n0_chunk, M, seed, (m, x, v, chi_bar, s, depth), workers)).astype(int)
    hist = np.bincount(n0, minlength=depth + 2)[1:]
    tail = np.array([np.mean(n0 > n) for n in range(depth + 1)])
    keep = (tail > 0) & (np.arange(depth + 1) < depth)
    if keep.sum() >= 3:
        res = stats.linregress(np.arange(depth + 1)[keep], np.log(tail[keep]))
        q = stats.t.ppf(0.975, keep.sum() - 2)
        slope, ci = float(res.slope), (float(res.slope - q * res.stderr), float(res.slope + q * res.stderr))
    else:
        slope, ci = math.nan, (math.nan, math.nan)
    return HyperbolicTimes(n0=n0, depth=depth, censored=int(np.sum(n0 > depth)), histogram=hist,
                           tail_frequency=tail, tail_slope=slope, tail_slope_ci=ci,
                           size_proxy=np.exp(-chi_bar * n0))
