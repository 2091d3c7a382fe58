import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact import tms
from artifact.errors import ConfigError, MonotonicityViolation

GOLDEN = (1 + math.sqrt(5)) / 2


def closure_components(g):
    """Oracle: classes of mutual reachability from a boolean transitive closure."""
    n = g.n_vertices
    R = np.eye(n, dtype=bool) | (g.adjacency() > 0)
    for k in range(n):
        R |= R[:, [k]] & R[[k], :]
    A = g.adjacency() > 0
    comps = set()
    for v in range(n):
        comp = tuple(u for u in range(n) if R[v, u] and R[u, v])
        if len(comp) > 1 or A[v, v]:
            comps.add(comp)
    return sorted(comps)


def random_graph(rng, n=12, p=0.15):
    A = rng.random((n, n)) < p
    return tms.MarkovGraph(n, list(zip(*np.nonzero(A))))


def test_components_match_closure_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        g = random_graph(rng, 12, rng.uniform(0.05, 0.3))
        assert tms.irreducible_components(g) == closure_components(g)


def test_full_shift_component():
    assert tms.irreducible_components(tms.full_shift(2)) == [(0, 1)]


def test_two_cycles_bridged():
    g = tms.MarkovGraph(5, [(0, 1), (1, 0), (2, 3), (3, 4), (4, 2), (1, 2)])
    assert tms.irreducible_components(g) == [(0, 1), (2, 3, 4)]


def test_dag_has_no_components():
    assert tms.irreducible_components(tms.MarkovGraph(4, [(0, 1), (1, 2), (0, 3)])) == []


def test_three_cycle_period():
    res = tms.period(tms.cycle_graph(3), (0, 1, 2))
    assert res.period == 3 and sorted(map(sorted, res.classes)) == [[0], [1], [2]]


def test_full_shift_period():
    assert tms.period(tms.full_shift(2), (0, 1)).period == 1


def test_cycle_lengths_four_and_six():
    # 4-cycle 0-1-2-3 plus a detour 1-4-5-2 giving a cycle of length 6
    g = tms.MarkovGraph(6, [(0, 1), (1, 2), (2, 3), (3, 0), (1, 4), (4, 5), (5, 2)])
    cycles = [len(c) for c in nx.simple_cycles(nx.DiGraph(g.edges))]
    assert sorted(cycles) == [4, 6]
    assert tms.period(g, (0, 1, 2, 3, 4, 5)).period == math.gcd(*cycles) == 2


def test_period_against_cycle_gcd():
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 40:
        g = random_graph(rng, 8, 0.2)
        for comp in tms.irreducible_components(g):
            sub = nx.DiGraph([(u, v) for u, v in g.edges if u in comp and v in comp])
            sub.add_nodes_from(comp)
            lengths = [len(c) for c in nx.simple_cycles(sub)]
            res = tms.period(g, comp)
            assert res.period == math.gcd(*lengths)
            # edges move class k to class k + 1
            cls = {v: k for k, vs in enumerate(res.classes) for v in vs}
            for u, v in sub.edges:
                assert cls[v] == (cls[u] + 1) % res.period
            checked += 1


@pytest.mark.parametrize("k", range(1, 7))
def test_full_shift_entropy_exact(k):
    assert tms.gurevich_entropy(tms.full_shift(k), tuple(range(k))) == math.log(k)


def test_golden_mean_entropy():
    assert abs(tms.gurevich_entropy(tms.golden_mean(), (0, 1)) - math.log(GOLDEN)) < 1e-10


def test_cycle_entropy_zero():
    assert tms.gurevich_entropy(tms.cycle_graph(3), (0, 1, 2)) == pytest.approx(0.0, abs=1e-12)


def test_entropy_against_eigenvalues():
    rng = np.random.default_rng(2)
    for _ in range(50):
        g = random_graph(rng, 10, 0.3)
        for comp in tms.irreducible_components(g):
            A = g.adjacency()[np.ix_(comp, comp)]
            rho = max(abs(np.linalg.eigvals(A)))
            assert tms.spectral_radius(g, comp) == pytest.approx(rho, rel=1e-10)


def test_loop_entropy_cross_check():
    g = tms.golden_mean()
    # tr(A^n) = Lucas number L_n, so (1/n) log L_n -> log golden
    assert tms.loop_entropy(g, (0, 1), 20) == pytest.approx(math.log(15127) / 20, abs=1e-15)


def test_parry_full_shift():
    pm = tms.parry_mme(tms.full_shift(2), (0, 1))
    assert np.allclose(pm.transitions, 0.5) and np.allclose(pm.stationary, 0.5)
    assert pm.entropy == pytest.approx(math.log(2), abs=1e-12)


def test_parry_golden_mean():
    pm = tms.parry_mme(tms.golden_mean(), (0, 1))
    assert np.allclose(pm.transitions[0], [1 / GOLDEN, 1 / GOLDEN ** 2], atol=1e-12)
    assert np.allclose(pm.transitions[1], [1.0, 0.0], atol=1e-12)
    assert abs(pm.entropy - math.log(GOLDEN)) < 1e-10


def test_parry_random_components():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = random_graph(rng, 10, 0.3)
        for comp in tms.irreducible_components(g):
            pm = tms.parry_mme(g, comp)
            A = g.adjacency()[np.ix_(comp, comp)]
            assert pm.stationarity_residual() < 1e-12
            assert np.all(pm.transitions[A == 0] == 0)
            assert abs(pm.entropy - math.log(pm.spectral_radius)) < 1e-10


def test_ladder_full_shifts():
    hs = tms.entropy_ladder([tms.full_shift(k) for k in range(1, 7)])
    assert hs == [math.log(k) for k in range(1, 7)]


def test_ladder_renewal_increases():
    hs = tms.entropy_ladder([tms.renewal_graph(L) for L in range(1, 12)])
    assert np.all(np.diff(hs) > 0) and hs[-1] < math.log(2)
    # level L: largest root of x^L = x^(L-1) + ... + 1
    for L, h in enumerate(hs, start=1):
        lam = math.exp(h)
        assert abs(lam ** L - sum(lam ** j for j in range(L))) < 1e-9 * lam ** L


def test_ladder_single_level():
    assert len(tms.entropy_ladder([tms.golden_mean()])) == 1


def test_ladder_must_nest():
    with pytest.raises(ValueError):
        tms.entropy_ladder([tms.cycle_graph(3), tms.golden_mean()])


def test_ladder_monotone_guard(monkeypatch):
    vals = iter([1.0, 0.5])
    monkeypatch.setattr(tms, "graph_entropy", lambda g: next(vals))
    with pytest.raises(MonotonicityViolation):
        tms.entropy_ladder([tms.golden_mean(), tms.full_shift(2)])


@given(st.sets(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=30))
def test_components_partition_cycle_vertices(edges):
    g = tms.MarkovGraph(7, edges)
    comps = tms.irreducible_components(g)
    flat = [v for c in comps for v in c]
    assert len(flat) == len(set(flat))
    on_cycle = {v for c in nx.simple_cycles(nx.DiGraph(list(edges))) for v in c}
    assert set(flat) == on_cycle


def test_graph_file_round_trip(tmp_path):
    g = tms.MarkovGraph(5, [(0, 1), (1, 0), (3, 3)])
    path = tmp_path / "g.txt"
    g.write(path)
    h = tms.MarkovGraph.read(path)
    assert h.n_vertices == 5 and h.edges == g.edges


def test_graph_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\n")
    with pytest.raises(ConfigError):
        tms.MarkovGraph.read(bad)
    bad.write_text("0 x\n")
    with pytest.raises(ConfigError):
        tms.MarkovGraph.read(bad)
