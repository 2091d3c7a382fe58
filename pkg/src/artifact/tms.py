"""Finite directed graphs as topological Markov shifts.

Irreducible components, period and cyclic classes, entropy as log spectral
radius, the Parry measure, and entropy ladders over nested finite graphs.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, MonotonicityViolation, NonConvergence

POWER_TOL = 1e-12
MAX_POWER_ITER = 100_000


class MarkovGraph:
    """Finite directed graph; an edge ``u -> v`` allows the transition u v."""

    def __init__(self, n_vertices: int, edges, labels=None):
        self.n_vertices = int(n_vertices)
        edges = [(int(u), int(v)) for u, v in edges]
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges")
        for u, v in edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"edge ({u}, {v}) outside 0..{self.n_vertices - 1}")
        self.edges = tuple(sorted(edges))
        self.labels = tuple(labels) if labels is not None else None

    def __repr__(self):
        return f"MarkovGraph(V={self.n_vertices}, E={len(self.edges)})"

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_vertices, self.n_vertices))
        for u, v in self.edges:
            A[u, v] = 1.0
        return A

    def contains(self, other: "MarkovGraph") -> bool:
        return other.n_vertices <= self.n_vertices and set(other.edges) <= set(self.edges)

    @classmethod
    def read(cls, path) -> "MarkovGraph":
        """Edge list, one ``u v`` per line; ``#`` starts a comment.

        A line ``# vertices N`` fixes the vertex count, otherwise it is one more
        than the largest index.
        """
        edges, n = [], None
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            body, _, comment = line.partition("#")
            words = comment.split()
            if len(words) == 2 and words[0] == "vertices":
                n = int(words[1])
            if not body.strip():
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'u v'")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: vertices must be integers") from None
        if n is None:
            n = 1 + max((max(e) for e in edges), default=-1)
        try:
            return cls(n, edges)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def write(self, path):
        lines = [f"# vertices {self.n_vertices}"] + [f"{u} {v}" for u, v in self.edges]
        Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- constructors

def full_shift(k: int) -> MarkovGraph:
    return MarkovGraph(k, [(u, v) for u in range(k) for v in range(k)])


def golden_mean() -> MarkovGraph:
    """Vertex 0 may follow anything, vertex 1 only 0."""
    return MarkovGraph(2, [(0, 0), (0, 1), (1, 0)])


def cycle_graph(n: int) -> MarkovGraph:
    return MarkovGraph(n, [(i, (i + 1) % n) for i in range(n)])


def renewal_graph(L: int) -> MarkovGraph:
    """Loops of every length 1..L through vertex 0; ``renewal_graph(2)`` is the golden mean."""
    return MarkovGraph(L, [(i, i + 1) for i in range(L - 1)] + [(i, 0) for i in range(L)])


# ---------------------------------------------------------------- structure

def irreducible_components(g: MarkovGraph) -> list:
    """Strongly connected components that carry at least one edge."""
    if g.n_vertices == 0:
        return []
    A = g.adjacency()
    _, lab = connected_components(csr_matrix(A), directed=True, connection="strong")
    comps = {}
    for v, c in enumerate(lab):
        comps.setdefault(c, []).append(v)
    out = [tuple(vs) for vs in comps.values() if len(vs) > 1 or A[vs[0], vs[0]] > 0]
    return sorted(out)


def _sub(g: MarkovGraph, comp):
    comp = tuple(sorted(comp))
    A = g.adjacency()[np.ix_(comp, comp)]
    return comp, A


@dataclass
class PeriodResult:
    period: int
    classes: list


def period(g: MarkovGraph, comp) -> PeriodResult:
    """gcd of ``level(u) + 1 - level(v)`` over edges, with BFS levels from one vertex.

    Class ``k`` holds the vertices at level ``k`` mod the period; edges go from
    class ``k`` to class ``k + 1``.
    """
    comp, A = _sub(g, comp)
    n = len(comp)
    level = [-1] * n
    level[0] = 0
    q = deque([0])
    while q:
        u = q.popleft()
        for v in np.flatnonzero(A[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                q.append(v)
    if min(level) < 0:
        raise ValueError("component is not strongly connected")
    p = 0
    for u, v in zip(*np.nonzero(A)):
        p = math.gcd(p, abs(level[u] + 1 - level[v]))
    classes = [[comp[i] for i in range(n) if level[i] % p == k] for k in range(p)]
    return PeriodResult(p, classes)


def _perron(M, v0=None, tol=POWER_TOL, max_iter=MAX_POWER_ITER):
    """Perron root and positive vector of the primitive matrix ``M`` by power iteration."""
    x = np.ones(M.shape[0]) if v0 is None else np.asarray(v0, dtype=float)
    x = x / x.max()
    lam = 0.0
    for _ in range(max_iter):
        y = M @ x
        new = y.sum() / x.sum()
        y /= y.max()
        if abs(new - lam) <= tol * new and np.max(np.abs(y - x)) <= 1e-14:
            return new, y / y.sum()
        x, lam = y, new
    if abs(new - lam) <= tol * new:
        return new, y / y.sum()
    raise NonConvergence(f"power iteration did not settle in {max_iter} steps")


def spectral_radius(g: MarkovGraph, comp) -> float:
    """Perron root of the component, iterating ``A + I`` so that periodicity cannot oscillate."""
    _, A = _sub(g, comp)
    lam, _ = _perron(A + np.eye(len(A)))
    return lam - 1.0


def gurevich_entropy(g: MarkovGraph, comp) -> float:
    return math.log(spectral_radius(g, comp))


def loop_entropy(g: MarkovGraph, comp, n_max: int = 20) -> float:
    """``(1/n) log tr(A^n)`` for the largest ``n <= n_max`` divisible by the period.

    An independent estimate of the entropy from closed-loop counts; its error
    is of order ``log(V) / n``.
    """
    _, A = _sub(g, comp)
    p = period(g, comp).period
    n = (n_max // p) * p
    if n == 0:
        raise ValueError("n_max smaller than the period")
    Ai = A.astype(object)
    P = np.identity(len(A), dtype=object)
    for _ in range(n):
        P = P.dot(Ai)
    tr = int(sum(P[i, i] for i in range(len(A))))
    return math.log(tr) / n


@dataclass
class ParryMeasure:
    vertices: tuple
    stationary: np.ndarray
    transitions: np.ndarray
    entropy: float
    spectral_radius: float

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.stationary @ self.transitions - self.stationary)))


def chain_entropy(pi, P) -> float:
    """Kolmogorov-Sinai entropy ``-sum pi_u P_uv log P_uv`` of a stationary chain."""
    logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    return float(-np.sum(pi[:, None] * P * logs))


def parry_mme(g: MarkovGraph, comp) -> ParryMeasure:
    """Maximal-entropy Markov chain ``P(u, v) = A(u, v) r(v) / (lam r(u))`` on the component."""
    comp, A = _sub(g, comp)
    I = np.eye(len(A))
    lam1, r = _perron(A + I)
    _, l = _perron(A.T + I)
    lam = lam1 - 1.0
    P = A * r[None, :] / (lam * r[:, None])
    P /= P.sum(axis=1, keepdims=True)
    pi = l * r
    pi /= pi.sum()
    return ParryMeasure(vertices=comp, stationary=pi, transitions=P, entropy=chain_entropy(pi, P),
                        spectral_radius=lam)


def graph_entropy(g: MarkovGraph) -> float:
    """Largest component entropy (0 when the graph carries no loop)."""
    return max((gurevich_entropy(g, c) for c in irreducible_components(g)), default=0.0)


def entropy_ladder(levels, tol: float = 1e-12) -> list:
    """Entropies of nested finite graphs; they must not decrease."""
    out, prev = [], None
    for g in levels:
        if prev is not None and not g.contains(prev):
            raise ValueError("ladder levels must be nested")
        h = graph_entropy(g)
        if out and h < out[-1] - tol:
            raise MonotonicityViolation(f"entropy dropped from {out[-1]} to {h}")
        out.append(h)
        prev = g
    return out
