"""Torus endomorphisms (linear, sheared, product) and Viana skew products.

Points are numpy arrays whose last axis has length 2. All torus maps act on
``[0, 1)^2`` and reduce their output with :func:`reduce_mod1`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, CosetEnumerationFailure, NotVolumePreserving

SNAP = 1e-12


def _real(x) -> np.ndarray:
    """Float array, keeping ``np.longdouble`` input in extended precision."""
    x = np.asarray(x)
    return x if x.dtype == np.longdouble else x.astype(float)


def reduce_mod1(x):
    x = _real(x)
    y = x - np.floor(x)
    return np.where(y > 1.0 - SNAP, 0.0, y)


def torus_distance(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d - np.round(d)
    return np.hypot(d[..., 0], d[..., 1])


def _as_int_matrix(E) -> np.ndarray:
    M = np.asarray(E)
    if M.shape != (2, 2):
        raise ConfigError(f"expected a 2x2 matrix, got shape {M.shape}")
    if not np.all(np.equal(np.mod(M, 1), 0)):
        raise ConfigError("matrix entries must be integers")
    return M.astype(np.int64)


def int_det(E) -> int:
    M = _as_int_matrix(E)
    return int(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


def hermite_normal_form(E) -> np.ndarray:
    """Lower-triangular ``H = E U`` (U unimodular) with positive diagonal."""
    M = _as_int_matrix(E)
    (a, b), (c, d) = M.tolist()
    if a == 0 and b == 0:
        # swap rows is not allowed (it changes the lattice); use column ops on row 2
        raise CosetEnumerationFailure("first row of E vanishes")
    g, u, v = _ext_gcd(a, b)
    # columns: [u, v] and [-b/g, a/g] form a unimodular matrix
    h11 = a * u + b * v
    h21 = c * u + d * v
    h22 = (-c * b + d * a) // g
    if h11 < 0:
        h11, h21 = -h11, -h21
    if h22 < 0:
        h22 = -h22
    h21 %= h22
    return np.array([[h11, 0], [h21, h22]], dtype=np.int64)


def coset_representatives(E) -> np.ndarray:
    """Integer vectors representing every class of Z^2 / E Z^2."""
    H = hermite_normal_form(E)
    reps = np.array([(i, j) for i in range(H[0, 0]) for j in range(H[1, 1])], dtype=np.int64)
    if len(reps) != abs(int_det(E)):
        raise CosetEnumerationFailure(f"{len(reps)} representatives for |det E| = {abs(int_det(E))}")
    return reps


@dataclass(frozen=True)
class ShearFunction:
    """Periodic function sum_k a_k sin(2 pi k x) + b_k cos(2 pi k x)."""

    sin_coeffs: tuple = (1.0,)
    cos_coeffs: tuple = ()

    def __call__(self, x):
        x = _real(x)
        out = np.zeros_like(x)
        for k, a in enumerate(self.sin_coeffs, start=1):
            out = out + a * np.sin(2 * np.pi * k * x)
        for k, b in enumerate(self.cos_coeffs, start=1):
            out = out + b * np.cos(2 * np.pi * k * x)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in enumerate(self.sin_coeffs, start=1):
            out = out + 2 * np.pi * k * a * np.cos(2 * np.pi * k * x)
        for k, b in enumerate(self.cos_coeffs, start=1):
            out = out - 2 * np.pi * k * b * np.sin(2 * np.pi * k * x)
        return out


class TorusEndo:
    """Common interface of the torus maps."""

    degree: int
    volume_preserving: bool

    def apply(self, p):
        raise NotImplementedError

    def jacobian(self, p):
        raise NotImplementedError

    def preimages(self, p) -> np.ndarray:
        raise NotImplementedError

    def det_jacobian(self, p):
        return np.linalg.det(self.jacobian(p))


class _AffineQuotientEndo(TorusEndo):
    """Maps of the form E o g with g a torus diffeomorphism of determinant +-1."""

    def _setup(self, E):
        self._E = _as_int_matrix(E)
        d = int_det(self._E)
        if d == 0:
            raise ConfigError("E must have non-zero determinant")
        self.degree = abs(d)
        self.volume_preserving = True
        # exact inverse as adjugate / det, valid in any float precision
        (a, b), (c, e) = self._E.tolist()
        self._adj = np.array([[e, -b], [-c, a]], dtype=float)
        self._det = float(d)
        self._reps = coset_representatives(self._E).astype(float)

    @property
    def E(self) -> np.ndarray:
        return self._E.copy()

    def _g(self, p):
        return p

    def _g_inv(self, z):
        return z

    def _dg(self, p):
        shape = np.shape(p)[:-1] + (2, 2)
        return np.broadcast_to(np.eye(2), shape)

    def apply(self, p):
        p = _real(p)
        return reduce_mod1(self._g(p) @ self._E.T.astype(float))

    def jacobian(self, p):
        p = np.asarray(p, dtype=float)
        return self._E.astype(float) @ self._dg(p)

    def inverse_branch(self, p, k):
        """Preimage of ``p`` on branch ``k`` (index into the coset representatives)."""
        p = _real(p)
        z = (p + self._reps[k]) @ self._adj.T / self._det
        return reduce_mod1(self._g_inv(reduce_mod1(z)))

    def preimages(self, p):
        p = _real(p)
        z = (p[None, :] + self._reps) @ self._adj.T / self._det
        return reduce_mod1(self._g_inv(reduce_mod1(z)))


class LinearEndo(_AffineQuotientEndo):
    def __init__(self, E):
        self._setup(E)

    def __repr__(self):
        return f"LinearEndo(E={self._E.tolist()})"


class ShearedEndo(_AffineQuotientEndo):
    """``E o P o h_t o P^-1`` with the shear ``h_t(x, y) = (x, y + t s(x))``."""

    def __init__(self, E, P=((1, 0), (0, 1)), t: float = 0.0, shear: ShearFunction | None = None):
        self._setup(E)
        self._P = _as_int_matrix(P)
        dP = int_det(self._P)
        if abs(dP) != 1:
            raise ConfigError(f"P must have determinant +-1, got {dP}")
        # exact integer inverse of a unimodular matrix
        (a, b), (c, d) = self._P.tolist()
        self._Pinv = (np.array([[d, -b], [-c, a]], dtype=np.int64) * dP)
        self.t = float(t)
        self.shear = shear if shear is not None else ShearFunction()

    def __repr__(self):
        return f"ShearedEndo(E={self._E.tolist()}, P={self._P.tolist()}, t={self.t})"

    @property
    def P(self) -> np.ndarray:
        return self._P.copy()

    def _g(self, p):
        u = reduce_mod1(p @ self._Pinv.T.astype(float))
        u = np.stack([u[..., 0], u[..., 1] + self.t * self.shear(u[..., 0])], axis=-1)
        return u @ self._P.T.astype(float)

    def _g_inv(self, z):
        u = reduce_mod1(z @ self._Pinv.T.astype(float))
        u = np.stack([u[..., 0], u[..., 1] - self.t * self.shear(u[..., 0])], axis=-1)
        return u @ self._P.T.astype(float)

    def _dg(self, p):
        u = reduce_mod1(np.asarray(p, dtype=float) @ self._Pinv.T.astype(float))
        dh = np.zeros(np.shape(u)[:-1] + (2, 2))
        dh[..., 0, 0] = 1.0
        dh[..., 1, 1] = 1.0
        dh[..., 1, 0] = self.t * self.shear.derivative(u[..., 0])
        return self._P.astype(float) @ dh @ self._Pinv.astype(float)


@dataclass(frozen=True)
class CircleFactor:
    """Circle map ``x -> k x + sum_m a_m sin(2 pi m x)`` (mod 1)."""

    degree: int
    sin_coeffs: tuple = ()

    def __post_init__(self):
        if self.degree == 0:
            raise ConfigError("circle factor degree must be non-zero")
        xs = np.linspace(0, 1, 2001)
        if np.min(np.sign(self.degree) * self.derivative(xs)) <= 0:
            raise ConfigError("circle factor must be a local diffeomorphism")

    def lift(self, x):
        x = np.asarray(x, dtype=float)
        out = self.degree * x
        for m, a in enumerate(self.sin_coeffs, start=1):
            out = out + a * np.sin(2 * np.pi * m * x)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, float(self.degree))
        for m, a in enumerate(self.sin_coeffs, start=1):
            out = out + 2 * np.pi * m * a * np.cos(2 * np.pi * m * x)
        return out

    def preimages(self, y: float) -> np.ndarray:
        k = abs(self.degree)
        if not self.sin_coeffs:
            return reduce_mod1((y + np.arange(k)) / self.degree)
        lo = float(self.lift(0.0))
        # the lift runs monotonically from lo to lo + degree on [0, 1]
        if self.degree > 0:
            targets = [y + m for m in range(math.ceil(lo - y), math.ceil(lo - y) + k)]
        else:
            targets = [y + m for m in range(math.floor(lo - y), math.floor(lo - y) - k, -1)]
        out = [brentq(lambda x, T=T: float(self.lift(x)) - T, 0.0, 1.0, xtol=1e-15)
               for T in targets]
        return reduce_mod1(np.array(out))


class ProductEndo(TorusEndo):
    """``(x, y) -> (F1(x), F2(y))`` for two circle factors."""

    def __init__(self, first: CircleFactor, second: CircleFactor):
        self.factors = (first, second)
        self.degree = abs(first.degree * second.degree)
        self.volume_preserving = not first.sin_coeffs and not second.sin_coeffs

    def __repr__(self):
        return f"ProductEndo({self.factors[0]!r}, {self.factors[1]!r})"

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        return reduce_mod1(np.stack([self.factors[0].lift(p[..., 0]),
                                     self.factors[1].lift(p[..., 1])], axis=-1))

    def jacobian(self, p):
        p = np.asarray(p, dtype=float)
        J = np.zeros(p.shape[:-1] + (2, 2))
        J[..., 0, 0] = self.factors[0].derivative(p[..., 0])
        J[..., 1, 1] = self.factors[1].derivative(p[..., 1])
        return J

    def preimages(self, p):
        p = np.asarray(p, dtype=float)
        xs = self.factors[0].preimages(float(p[0]))
        ys = self.factors[1].preimages(float(p[1]))
        return np.array([(x, y) for x in xs for y in ys])


def apply(m, p):
    return m.apply(p)


def jacobian(m, p):
    return m.jacobian(p)


def preimages(m: TorusEndo, p) -> np.ndarray:
    if isinstance(m, VianaMap):
        raise TypeError("use viana_preimages for Viana maps")
    return m.preimages(p)


# ---------------------------------------------------------------- Viana maps

def misiurewicz_a0(bracket=(1.5, 1.6), tol=1e-15) -> float:
    """Parameter in (1, 2) where 0 lands on the positive fixed point of a - t^2 in three steps."""

    def g(a):
        q = (-1.0 + math.sqrt(1.0 + 4.0 * a)) / 2.0
        t = 0.0
        for _ in range(3):
            t = a - t * t
        return t - q

    lo, hi = bracket
    if g(lo) * g(hi) > 0:
        raise ValueError("bracket does not isolate a root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def viana_trapping_interval(a0: float, alpha: float) -> tuple[float, float]:
    """Symmetric interval [-b, b] mapped strictly inside itself by every fibre map."""
    b_lo = a0 + alpha
    disc = 1.0 + 4.0 * (a0 - alpha)
    if disc <= 0:
        raise ConfigError("no trapping interval for these parameters")
    b_hi = (1.0 + math.sqrt(disc)) / 2.0
    if not (b_lo < b_hi < 2.0):
        raise ConfigError(f"no trapping interval for a0={a0}, alpha={alpha}")
    b = 0.5 * (b_lo + b_hi)
    return (-b, b)


@dataclass(frozen=True)
class VianaMap:
    """``(theta, t) -> (d theta, a0 + alpha sin(2 pi theta) - t^2)`` on S^1 x I0."""

    a0: float
    d: int = 16
    alpha: float = 1e-2
    I0: tuple = field(default=None)

    volume_preserving = False

    def __post_init__(self):
        if not (1.0 < self.a0 < 2.0):
            raise ConfigError("a0 must lie in (1, 2)")
        if self.d < 2:
            raise ConfigError("d must be at least 2")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.I0 is None:
            object.__setattr__(self, "I0", viana_trapping_interval(self.a0, self.alpha))

    @classmethod
    def default(cls, d: int = 16, alpha: float = 1e-2) -> "VianaMap":
        return cls(a0=misiurewicz_a0(), d=d, alpha=alpha)

    @property
    def degree(self) -> int:
        return self.d

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        th, t = p[..., 0], p[..., 1]
        return np.stack([reduce_mod1(self.d * th),
                         self.a0 + self.alpha * np.sin(2 * np.pi * th) - t * t], axis=-1)

    def jacobian(self, p):
        p = np.asarray(p, dtype=float)
        th, t = p[..., 0], p[..., 1]
        J = np.zeros(p.shape[:-1] + (2, 2))
        J[..., 0, 0] = self.d
        J[..., 1, 0] = 2 * np.pi * self.alpha * np.cos(2 * np.pi * th)
        J[..., 1, 1] = -2.0 * t
        return J

    def det_jacobian(self, p):
        p = np.asarray(p, dtype=float)
        return -2.0 * self.d * p[..., 1]

    def invariant_margin(self, n_grid: int = 1000) -> float:
        """Smallest distance from the image of the boundary of S^1 x I0 to that boundary.

        Positive iff the boundary grid is mapped into the interior; for each fibre the
        image of I0 is an interval whose extreme points are images of 0 and of the ends,
        so the grid also covers t = 0.
        """
        th = np.linspace(0.0, 1.0, n_grid, endpoint=False)
        lo, hi = self.I0
        ts = np.array([lo, 0.0, hi])
        pts = np.stack(np.broadcast_arrays(th[:, None], ts[None, :]), axis=-1).reshape(-1, 2)
        img = self.apply(pts)[:, 1]
        return float(min(np.min(img - lo), np.min(hi - img)))

    def preimages(self, p):
        return viana_preimages(self, p)


def viana_preimages(m: VianaMap, p) -> np.ndarray:
    th1, t1 = float(p[0]), float(p[1])
    lo, hi = m.I0
    out = []
    for k in range(m.d):
        th = (th1 + k) / m.d
        rad = m.a0 + m.alpha * math.sin(2 * math.pi * th) - t1
        if rad < 0:
            continue
        r = math.sqrt(rad)
        for t in ((r, -r) if r > 0 else (r,)):
            if lo <= t <= hi:
                out.append((th % 1.0, t))
    return np.array(out, dtype=float).reshape(-1, 2)


def viana_orbit(m: VianaMap, start, n: int, rng: np.random.Generator):
    """Orbit of ``start = (theta0, t0)`` (or a bare fibre coordinate ``t0``).

    Repeated multiplication by ``d`` exhausts the mantissa of a float (for d = 16
    every angle becomes 0 after 13 steps), so the angle is carried as a window of
    base-``d`` digits. The window starts with the digits of ``theta0`` (uniform
    random if omitted) and each step appends a fresh digit drawn from ``rng``, so
    the angle sequence has the law of the orbit of a Lebesgue-typical angle.
    """
    K = int(math.ceil(60 * math.log(2) / math.log(m.d))) + 1
    digits = rng.integers(0, m.d, size=n + K)
    if np.ndim(start) == 0:
        t0 = float(start)
    else:
        th, t0 = float(start[0]) % 1.0, float(start[1])
        for j in range(K):
            th *= m.d
            digits[j] = min(int(th), m.d - 1)
            th -= digits[j]
    weights = float(m.d) ** -np.arange(1, K + 1)
    windows = np.lib.stride_tricks.sliding_window_view(digits, K)[: n + 1]
    theta = reduce_mod1(windows @ weights)
    t = np.empty(n + 1)
    t[0] = t0
    s = m.alpha * np.sin(2 * np.pi * theta)
    a0 = m.a0
    tk = t0
    for k in range(n):
        tk = a0 + s[k] - tk * tk
        t[k + 1] = tk
    return np.stack([theta, t], axis=-1)


# ---------------------------------------------------------------- natural extension

@dataclass
class PreOrbit:
    """Finite backward branch ``x_0, x_-1, ..., x_-n`` with its mass under mu^-_x."""

    base: np.ndarray
    branch: np.ndarray
    weight: float

    @property
    def depth(self) -> int:
        return len(self.branch) - 1

    def pushed(self, m) -> "PreOrbit":
        """Pre-orbit of ``f(x_0)`` obtained by prepending the image of the base."""
        fx = np.asarray(m.apply(self.base), dtype=float)
        w = self.weight / abs(float(np.linalg.det(m.jacobian(self.base))))
        return PreOrbit(base=fx, branch=np.vstack([fx, self.branch]), weight=w)


def _require_volume_preserving(m):
    if isinstance(m, VianaMap) or not getattr(m, "volume_preserving", False):
        raise NotVolumePreserving(f"{m!r} does not preserve Lebesgue measure")


def sample_preorbit(m: TorusEndo, x, depth: int, rng: np.random.Generator) -> PreOrbit:
    """Backward random walk choosing each preimage with probability 1/|det df|."""
    _require_volume_preserving(m)
    x = reduce_mod1(np.asarray(x, dtype=float))
    branch = [x]
    weight = 1.0
    cur = x
    for _ in range(depth):
        ys = m.preimages(cur)
        w = 1.0 / np.abs(np.linalg.det(m.jacobian(ys)))
        k = rng.choice(len(ys), p=w / w.sum())
        cur = ys[k]
        weight *= w[k]
        branch.append(cur)
    return PreOrbit(base=x, branch=np.array(branch), weight=float(weight))


def sample_preorbits(m: _AffineQuotientEndo, x, depth: int, size: int,
                     rng: np.random.Generator) -> np.ndarray:
    """``size`` independent branches at once, shape ``(size, depth + 1, 2)``.

    Only for the constant-determinant families, where every branch is equally likely.
    """
    _require_volume_preserving(m)
    if not isinstance(m, _AffineQuotientEndo):
        raise NotVolumePreserving("vectorised sampling needs a constant-determinant map")
    out = np.empty((size, depth + 1, 2))
    out[:, 0] = reduce_mod1(np.asarray(x, dtype=float))
    for j in range(depth):
        k = rng.integers(0, m.degree, size=size)
        out[:, j + 1] = m.inverse_branch(out[:, j], k)
    return out


# ---------------------------------------------------------------- ACS matrix conditions

@dataclass
class AcsReport:
    not_homothety: bool
    no_unit_eigenvalue: bool
    det_gcd_ratio: float
    det_gcd_ok: bool
    eigenvalues: tuple

    @property
    def all_pass(self) -> bool:
        return self.not_homothety and self.no_unit_eigenvalue and self.det_gcd_ok


def validate_acs_matrix(E) -> AcsReport:
    M = _as_int_matrix(E)
    (a, b), (c, d) = M.tolist()
    det = a * d - b * c
    homothety = b == 0 and c == 0 and a == d
    # char poly at +-1: det(E - I), det(E + I)
    unit_eig = (a - 1) * (d - 1) - b * c == 0 or (a + 1) * (d + 1) - b * c == 0
    g = math.gcd(math.gcd(a, b), math.gcd(c, d))
    ratio = abs(det) / g if g else float("inf")
    eig = np.linalg.eigvals(M.astype(float))
    eig = tuple(sorted(eig.tolist(), key=lambda z: (-abs(z), -np.real(z))))
    return AcsReport(not_homothety=not homothety, no_unit_eigenvalue=not unit_eig,
                     det_gcd_ratio=float(ratio), det_gcd_ok=ratio > 4, eigenvalues=eig)


# ---------------------------------------------------------------- configuration

_MAP_KEYS = {
    "linear": {"family", "E"},
    "sheared": {"family", "E", "P", "t", "shear_sin", "shear_cos"},
    "product": {"family", "degrees", "sin_coeffs"},
    "viana": {"family", "a0", "d", "alpha", "I0"},
}


def map_from_config(cfg: dict):
    """Build a map from a flat key-value dictionary (see README for the schema)."""
    fam = cfg.get("family")
    if fam not in _MAP_KEYS:
        raise ConfigError(f"unknown map family {fam!r}")
    allowed = _MAP_KEYS[fam] | {"name"}
    extra = set(cfg) - allowed
    if extra:
        raise ConfigError(f"unknown keys for family {fam!r}: {sorted(extra)}")
    try:
        if fam == "linear":
            return LinearEndo(cfg["E"])
        if fam == "sheared":
            shear = ShearFunction(tuple(cfg.get("shear_sin", (1.0,))), tuple(cfg.get("shear_cos", ())))
            return ShearedEndo(cfg["E"], cfg.get("P", ((1, 0), (0, 1))), float(cfg.get("t", 0.0)), shear)
        if fam == "product":
            degs = cfg["degrees"]
            coeffs = cfg.get("sin_coeffs", [[], []])
            return ProductEndo(CircleFactor(int(degs[0]), tuple(coeffs[0])),
                               CircleFactor(int(degs[1]), tuple(coeffs[1])))
        a0 = cfg.get("a0", "auto")
        a0 = misiurewicz_a0() if a0 == "auto" else float(a0)
        I0 = tuple(cfg["I0"]) if "I0" in cfg else None
        return VianaMap(a0=a0, d=int(cfg.get("d", 16)), alpha=float(cfg.get("alpha", 1e-2)), I0=I0)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r} for family {fam!r}") from None


def default_acs_map() -> ShearedEndo:
    """Sheared map used throughout the experiments."""
    return ShearedEndo(E=((6, 1), (1, 1)), P=((1, 0), (0, 1)), t=ACS_DEFAULT_T)


ACS_DEFAULT_T = 5.0
