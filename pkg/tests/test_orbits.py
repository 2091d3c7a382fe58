import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.billiard import geometry as geo, orbits as orb
from artifact.errors import ConfigError

MAX_GAP = 0.25


@pytest.fixture(scope="module")
def table():
    return geo.three_disc_table()


@pytest.fixture(scope="module")
def db(table):
    return orb.enumerate_orbits(table, 4, MAX_GAP)


def diametral_rate(K, tau):
    a = 1 + K * tau
    return math.log(a + math.sqrt(a * a - 1))


def test_diametral_two_orbit(two_disc):
    o = orb.solve_orbit(two_disc, orb.Itinerary((0, 1), ((0, 0), (0, 0))))
    assert np.allclose([s.phi for s in o.points], 0.0, atol=1e-12)
    assert np.allclose(o.taus, 0.5 - 2 * 0.1, atol=1e-12)
    assert o.expansion_rate == pytest.approx(diametral_rate(10.0, 0.3), abs=1e-8)
    assert orb.closure_residual(two_disc, o) < 1e-9


@given(st.lists(st.floats(-math.pi, math.pi), min_size=3, max_size=3))
def test_length_derivatives_match_finite_differences(theta):
    table = geo.three_disc_table()
    it = orb.Itinerary((0, 1, 2), ((0, 0), (0, 0), (0, 0)))
    centres = orb._copy_centres(table, it)
    R = table.radii[[0, 1, 2, 0]]
    th = np.array(theta)
    L, g, H = orb.length_gradient_hessian(centres, R, th)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        Lp, gp, _ = orb.length_gradient_hessian(centres, R, th + e)
        Lm, gm, _ = orb.length_gradient_hessian(centres, R, th - e)
        assert (Lp - Lm) / (2 * h) == pytest.approx(g[i], abs=1e-6)
        assert np.allclose((gp - gm) / (2 * h), H[:, i], atol=1e-5)


def test_certificates(table, db):
    assert len(db.orbits) > 0
    for o in db.orbits:
        assert o.grad_norm < 1e-10
        assert o.reflection_residual < 1e-9
        assert orb.closure_residual(table, o) < 1e-9


def test_incidence(table, db):
    for o in db.orbits:
        for s, pos in zip(o.points, o.positions):
            d = pos - table.centers[s.disc]
            d -= np.round(d)
            assert abs(np.linalg.norm(d) - table.radii[s.disc]) < 1e-12


def test_cycle_derivative_unimodular(table, db):
    for o in db.orbits:
        K = 1.0 / table.radii[[s.disc for s in o.points]]
        c = np.cos([s.phi for s in o.points])
        M, dets = np.eye(2), 1.0
        for i in range(o.period):
            j = (i + 1) % o.period
            D = geo.derivative_matrices(K[i], K[j], o.taus[i], c[i], c[j])
            M = D @ M
            dets *= np.linalg.det(D)
        assert abs(dets - 1.0) < 1e-9
        # det of the product itself loses digits to cancellation in proportion to |M|^2
        assert abs(np.linalg.det(M) - 1.0) < 1e-14 * np.sum(M * M)
        lam = max(abs(np.linalg.eigvals(M)))
        assert math.log(lam) / o.period == pytest.approx(o.expansion_rate, abs=1e-12)


def test_rate_invariant_under_rotation_and_reversal(table, db):
    for o in db.orbits[::3]:
        it = o.itinerary
        for other in [it.rotated(k) for k in range(1, len(it))] + [it.reversed()]:
            assert orb.solve_orbit(table, other).expansion_rate == pytest.approx(o.expansion_rate, abs=1e-10)


def test_rates_above_uniform_bound(table, db):
    logL = math.log(geo.min_expansion_Lambda(table))
    assert all(o.expansion_rate >= logL for o in db.orbits)


def test_symmetry_classes_share_rates(table, db):
    rates = np.array([o.expansion_rate for o in db.orbits])
    classes = orb.symmetry_classes(table, db.orbits)
    assert sum(map(len, classes)) == len(db.orbits)
    assert max(np.ptp(rates[c]) for c in classes) < 1e-8


def test_table_symmetries(table):
    syms = orb.table_symmetries(table)
    # identity and the diagonal reflection x <-> y
    assert len(syms) == 2


def unobstructed_pairs(table, max_gap):
    """Oracle for the 2-orbits: unordered pairs of scatterer copies whose centre line is clear."""
    C, R = table.centers, table.radii[0]
    pairs = set()
    for a, b in itertools.product(range(table.n_discs), repeat=2):
        for s in itertools.product(range(-2, 3), repeat=2):
            cb = C[b] + np.array(s, dtype=float)
            if a == b and s == (0, 0):
                continue
            d = cb - C[a]
            if np.linalg.norm(d) - 2 * R > max_gap:
                continue
            clear = True
            for c, t in itertools.product(range(table.n_discs), itertools.product(range(-3, 4), repeat=2)):
                cc = C[c] + np.array(t, dtype=float)
                if np.allclose(cc, C[a]) or np.allclose(cc, cb):
                    continue
                u = np.clip((cc - C[a]) @ d / (d @ d), 0, 1)
                if np.linalg.norm(C[a] + u * d - cc) < R:
                    clear = False
            if clear:
                key = frozenset([(a, (0, 0)), (b, s)])
                # identify the pair with its translate starting at b
                alt = frozenset([(b, (0, 0)), (a, (-s[0], -s[1]))])
                pairs.add(min(key, alt, key=sorted))
    return len(pairs)


def test_period_two_count(table, db):
    assert len(db.by_period()[2]) == unobstructed_pairs(table, MAX_GAP)


def test_no_duplicates(db):
    keys = [o.key() for o in db.orbits]
    assert len(keys) == len(set(keys))


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(-1, 1), st.integers(-1, 1)), min_size=2, max_size=6),
       st.integers(0, 5))
def test_canonical_form_invariance(word, k):
    discs = tuple(w[0] for w in word)
    shifts = tuple((w[1], w[2]) for w in word)
    try:
        it = orb.Itinerary(discs, shifts)
    except ValueError:
        return
    can = it.canonical()
    assert it.rotated(k).canonical() == can
    assert it.reversed().canonical() == can
    assert it.reversed().reversed() == it
    assert orb.Itinerary.parse(str(it)) == it


def test_primitive():
    assert orb.Itinerary((0, 1), ((0, 0), (0, 0))).is_primitive()
    assert not orb.Itinerary((0, 1, 0, 1), ((0, 0),) * 4).is_primitive()


def test_same_copy_rejected():
    with pytest.raises(ValueError):
        orb.Itinerary((0, 0), ((0, 0), (1, 0)))


def test_report_on_empty_set(table):
    rep = orb.mme_criterion_report(table, 4, db=orb.OrbitDatabase([], {}))
    assert rep.no_data and rep.verdict == "no data"


def test_report_spread(table, db):
    rep = orb.mme_criterion_report(table, 4, MAX_GAP, db=db)
    rates = [o.expansion_rate for o in db.orbits]
    assert rep.spread == pytest.approx(max(rates) - min(rates))
    assert rep.min_rate >= rep.log_Lambda
    assert rep.class_spread < 1e-8


def test_pressure_zero(table):
    pc = orb.pressure_zero_check(table, 100_000, np.random.default_rng(2))
    assert pc.residual < 1e-3


def test_pressure_wrong_bundle(table):
    pc = orb.pressure_zero_check(table, 100_000, np.random.default_rng(2), direction="stable")
    assert pc.residual == pytest.approx(2 * pc.lambda_plus, rel=0.05)


def test_pressure_minimum_length(table):
    with pytest.raises(ValueError):
        orb.pressure_zero_check(table, 1000, np.random.default_rng(0))


def test_pressure_residual_shrinks(table):
    a = orb.pressure_zero_check(table, 100_000, np.random.default_rng(3))
    b = orb.pressure_zero_check(table, 1_000_000, np.random.default_rng(3))
    assert b.residual < a.residual


def test_diametral_bounce_matrix(two_disc):
    D = geo.derivative_matrices(10.0, 10.0, 0.3, 1.0, 1.0)
    # with s = -sin(phi) orientation the bounce matrix is minus the usual one
    assert np.trace(D) == pytest.approx(-(2 + 2 * 10.0 * 0.3))
    assert np.linalg.det(D) == pytest.approx(1.0)


def test_vertical_direction_enters_unstable_cone(table):
    rng = np.random.default_rng(8)
    for _ in range(200):
        s = geo.random_state(table, rng)
        nxt, tau = geo.collide(table, s)
        w = geo.derivative(table, s, nxt, tau) @ np.array([0.0, 1.0])
        assert w[1] / w[0] >= table.curvature(nxt.disc)


def test_nearest_pairs_share_rate(db):
    nearest = sorted(o.expansion_rate for o in db.by_period()[2])[:3]
    assert np.ptp(nearest) < 1e-8


def test_rotation_gives_same_point_set(table, db):
    for o in db.orbits[::4]:
        rot = orb.solve_orbit(table, o.itinerary.rotated(1))
        assert orb._pos_key(rot.positions) == orb._pos_key(o.positions)
