import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcmg import analysis as an
from dcmg.errors import AssumptionViolation, DegenerateLoadProfile, NonpositiveNu
from dcmg.plant import DGRatings, ElectricalNetwork, partitioned_admittance, steady_state_oracle
from dcmg.topology import NodePartition

from .conftest import random_network, random_partition, random_ratings

seeds = st.integers(0, 2**32 - 1)
GRID = np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 10)


@pytest.fixture(scope="module")
def uss(case1):
    return an.uniform_steady(case1.model.net, case1.model.ratings)


@pytest.fixture(scope="module")
def css(case2):
    m = case2.model
    return an.critical_steady(partitioned_admittance(m.net, m.partition), m.ratings, 2.0)


def test_deviation_definitions():
    rep = an.deviations([380.0, 399.0], [10.0, 30.0], [20.0, 20.0], 380.0)
    assert np.allclose(rep.delta_v, [0.0, 0.05])
    assert np.allclose(rep.delta_i, [-0.5, 0.5])
    assert rep.mvdr == pytest.approx(0.05) and rep.mcdr == pytest.approx(0.5)
    assert abs(rep.delta_i.sum()) < 1e-15
    with pytest.raises(DegenerateLoadProfile):
        an.deviations([380.0], [0.0], [20.0], 380.0)


def test_conflict_check_proportional_loads():
    net = ElectricalNetwork.from_lines(2, [(0, 1, 2.0, 2e-5)], [0.1, 0.05], [1e-3] * 2, [1e-3] * 2)
    assert an.conflict_check(net, DGRatings.rating_inverse([38.0, 19.0], 380.0)).compatible
    zero = ElectricalNetwork.from_lines(2, [(0, 1, 2.0, 2e-5)], [0.1, 0.0], [1e-3] * 2, [1e-3] * 2)
    assert not an.conflict_check(zero, DGRatings.rating_inverse([38.0, 19.0], 380.0)).compatible


def test_conflict_check_bundled(case1):
    cc = an.conflict_check(case1.model.net, case1.model.ratings)
    assert not cc.compatible
    assert np.allclose(cc.ratios, [1500, 600, 520, 700, 1520, 920, 1600])


def test_uniform_no_conflict_gives_zero_psi():
    net = ElectricalNetwork.from_lines(3, [(0, 1, 2.0, 2e-5), (1, 2, 1.0, 2e-5)], [0.1, 0.05, 0.02], [1e-3] * 3, [1e-3] * 3)
    ss = an.uniform_steady(net, DGRatings.rating_inverse(380 * np.array([0.1, 0.05, 0.02]), 380.0))
    assert np.max(np.abs(ss.psi)) < 1e-12


def test_uniform_requires_loads():
    net = ElectricalNetwork.from_lines(2, [(0, 1, 2.0, 2e-5)], [0.1, 0.0], [1e-3] * 2, [1e-3] * 2)
    with pytest.raises(AssumptionViolation):
        an.uniform_steady(net, DGRatings.rating_inverse([30.0, 30.0], 380.0))


@given(seeds, st.integers(2, 8))
@settings(max_examples=20, deadline=None)
def test_psi_zero_sum(seed, n):
    rng = np.random.default_rng(seed)
    ss = an.uniform_steady(random_network(rng, n), random_ratings(rng, n))
    assert abs(ss.psi.sum()) < 1e-10


def test_uniform_endpoints(uss):
    assert np.all(an.uniform_delta_v(uss, 0.0) == 0)
    assert np.allclose(an.uniform_delta_v(uss, 1.0), uss.psi / uss.mu, atol=1e-15)
    assert np.all(an.uniform_delta_i(uss, 1.0) == 0)
    assert np.allclose(an.uniform_delta_i(uss, 0.0), uss.delta_i_b, atol=1e-15)
    assert an.uniform_alpha(uss, 0.0) == 1.0
    assert an.uniform_alpha(uss, 1.0) == pytest.approx(1 / uss.mu)


def test_uniform_reference_numbers(uss):
    dv = an.uniform_delta_v(uss, 1.0)
    assert np.max(np.abs(dv)) == pytest.approx(0.061, abs=0.003)
    assert np.argmin(dv) == 2
    assert 380 * abs(dv[2]) == pytest.approx(23.3, abs=0.5)
    assert np.max(np.abs(an.uniform_delta_i(uss, 0.0))) == pytest.approx(0.671, abs=0.01)
    assert np.max(np.abs(an.uniform_delta_i(uss, 0.277))) == pytest.approx(0.358, abs=0.01)
    assert an.design_theta_uniform(uss, 0.03) == pytest.approx(0.277, abs=0.005)


def test_uniform_matches_oracle(case1, uss):
    m = case1.model
    for theta in (0.0, 0.5, 1.0, 0.277):
        v, i, alpha = an.uniform_solution(uss, theta)
        vo, io, ao = steady_state_oracle(m.net, m.ratings, an.uniform_reference(uss, theta), "uniform")
        assert np.allclose(v, vo, rtol=1e-10)
        assert np.allclose(i, io, rtol=1e-10)
        assert alpha == pytest.approx(ao, rel=1e-10)
        assert np.allclose(an.uniform_delta_v(uss, theta), (vo - 380) / 380, atol=1e-6)


def test_alpha_is_one_when_mu_is_one(uss):
    from dataclasses import replace

    ss = replace(uss, mu=1.0)
    assert all(an.uniform_alpha(ss, t) == 1.0 for t in (0, 0.3, 1))


def test_design_theta_uniform_branches(uss):
    assert an.design_theta_uniform(uss, 0.0) == 0.0
    assert an.design_theta_uniform(uss, 0.10) == 1.0
    worst = float(np.max(np.abs(uss.psi))) / uss.mu
    assert an.design_theta_uniform(uss, worst) == 1.0
    # the middle branch meets the boundary continuously
    assert an._design_theta(float(np.max(np.abs(uss.psi))), uss.mu, 1.0, worst * (1 - 1e-12)) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        an.design_theta_uniform(uss, -0.1)


@pytest.mark.parametrize("gamma", [0.005, 0.01, 0.03, 0.05, 0.2])
def test_design_theta_guarantee(uss, css, gamma):
    td = an.design_theta_uniform(uss, gamma)
    worst = float(np.max(np.abs(an.uniform_delta_v(uss, 1.0))))
    assert np.max(np.abs(an.uniform_delta_v(uss, td))) == pytest.approx(min(gamma, worst), abs=1e-9)
    td1 = an.design_theta_critical(css, gamma)
    worst1 = float(np.max(np.abs(an.critical_delta_v(css, 1.0))))
    assert np.max(np.abs(an.critical_delta_v(css, td1))) == pytest.approx(min(gamma, worst1), abs=1e-9)


def test_uniform_monotone_on_grid(uss):
    dv = np.abs([an.uniform_delta_v(uss, t) for t in GRID])
    di = np.abs([an.uniform_delta_i(uss, t) for t in GRID])
    assert np.all(np.diff(dv, axis=0) >= -1e-15)
    assert np.all(np.diff(di, axis=0) <= 1e-15)


def test_uniform_trichotomy(uss):
    mv1 = np.max(np.abs(an.uniform_delta_v(uss, 1.0)))
    mc0 = np.max(np.abs(an.uniform_delta_i(uss, 0.0)))
    for t in (0.1, 0.5, 0.9):
        assert 0 < np.max(np.abs(an.uniform_delta_v(uss, t))) < mv1
        assert 0 < np.max(np.abs(an.uniform_delta_i(uss, t))) < mc0


def test_theta_and_omega_validated(uss, css):
    for bad in (-0.1, 1.1, np.nan):
        with pytest.raises(ValueError):
            an.uniform_delta_v(uss, bad)
    for bad in (0.0, -1.0, np.inf):
        with pytest.raises(ValueError):
            an.check_omega(bad)
    with pytest.raises(ValueError):
        an.omega_range(css, 1.0)


# -- critical / ordinary ------------------------------------------------------------


def test_ib1_degenerates_to_load_currents(case1):
    m = case1.model
    pa = partitioned_admittance(m.net, NodePartition.all_critical(7))
    assert np.allclose(an.i_b1(pa, m.ratings, 1.0), 380 * m.net.load_conductance, rtol=1e-12)


def test_ib1_two_paths(case2):
    m = case2.model
    pa = partitioned_admittance(m.net, m.partition)
    ib1 = an.i_b1(pa, m.ratings, 2.0)
    # full-solve path: eliminate ordinary nodes with the full matrix inverse
    ybar = pa.y_bar
    c, o = pa.critical, pa.ordinary
    inv = np.linalg.inv(ybar)
    schur = np.linalg.inv(inv[np.ix_(c, c)])
    injected = ybar[np.ix_(c, o)] @ np.linalg.lstsq(ybar[np.ix_(o, o)], m.ratings.current_capacity[o], rcond=None)[0]
    alt = 2.0 * 380 * schur.sum(axis=1) + injected
    assert ib1.sum() == pytest.approx(alt.sum(), rel=1e-9)


def test_ib1_affine_in_omega(case2):
    m = case2.model
    pa = partitioned_admittance(m.net, m.partition)
    for w in (0.5, 1.0, 2.0):
        diff = an.i_b1(pa, m.ratings, 2 * w) - an.i_b1(pa, m.ratings, w)
        assert np.allclose(diff, w * 380 * pa.schur_ord.sum(axis=1), rtol=1e-12)


def test_critical_degenerates_to_uniform(case1, uss):
    m = case1.model
    ss = an.critical_pipeline(m.net, m.ratings, range(7), 1.0)
    assert ss.mu == pytest.approx(uss.mu, abs=1e-12)
    assert np.allclose(ss.psi1, uss.psi, atol=1e-12)
    for t in (0.0, 0.3, 1.0):
        assert np.allclose(an.critical_delta_v(ss, t), an.uniform_delta_v(uss, t), atol=1e-12)
        assert np.allclose(an.critical_delta_i(ss, t), an.uniform_delta_i(uss, t), atol=1e-12)
        assert an.critical_alpha(ss, t) == pytest.approx(an.uniform_alpha(uss, t), abs=1e-12)
    for g in (0.0, 0.03, 0.5):
        assert an.design_theta_critical(ss, g) == pytest.approx(an.design_theta_uniform(uss, g), abs=1e-12)


def test_critical_bundled_structure(css):
    assert abs(css.psi1.sum()) < 1e-10
    assert np.all(css.upsilon1 > 0)


def test_critical_reference_numbers(case2, css):
    assert an.design_theta_critical(css, 0.02) == pytest.approx(0.63, abs=0.01)
    assert np.max(np.abs(an.critical_delta_v(css, 0.63))) == pytest.approx(0.02, abs=0.001)
    assert an.critical_alpha(css, 0.0) == pytest.approx(0.5, abs=1e-14)
    m = case2.model
    pa = partitioned_admittance(m.net, m.partition)
    rng = an.omega_range(css, 0.0)
    assert rng.lower == pytest.approx(1.71, abs=0.02)
    assert rng.binding_node == 6
    at = an.critical_steady(pa, m.ratings, 1.71)
    ipu1 = an.critical_ipu1(at, 0.0)
    assert ipu1[-1] < 0.01
    assert an.critical_alpha(at, 0.0) == pytest.approx(0.585, abs=0.005)


def test_critical_endpoints(css):
    assert np.all(an.critical_delta_v(css, 0.0) == 0)
    assert np.all(an.critical_delta_i(css, 1.0) == 0)
    ib = css.i_b1 / css.i_star1
    assert np.allclose(an.critical_delta_i(css, 0.0), (ib - ib.mean()) / ib.mean(), atol=1e-15)
    assert an.critical_alpha(css, 1.0) == pytest.approx(1 / css.mu)
    assert np.allclose(an.critical_ipu1(css, 1.0), 1 / css.mu)
    assert np.allclose(an.ordinary_voltages(css, 0.0), css.omega2 / css.omega)


def test_critical_monotone_on_grid(css):
    dv = np.abs([an.critical_delta_v(css, t) for t in GRID])
    di = np.abs([an.critical_delta_i(css, t) for t in GRID])
    assert np.all(np.diff(dv, axis=0) >= -1e-15)
    assert np.all(np.diff(di, axis=0) <= 1e-15)


def test_critical_matches_oracle(case2, css):
    m = case2.model
    for theta in (0.0, 0.5, 0.63, 1.0):
        v, i, alpha = an.critical_solution(css, theta)
        vo, io, ao = steady_state_oracle(m.net, m.ratings, an.critical_reference(css, theta), "critical", m.partition)
        assert np.allclose(v, vo, rtol=1e-10)
        assert np.allclose(i, io, rtol=1e-10)
        assert alpha == pytest.approx(ao, rel=1e-10)


def test_ordinary_voltages_finite_when_mu_equals_omega(case2):
    m = case2.model
    pa = partitioned_admittance(m.net, m.partition)
    mu = an.critical_steady(pa, m.ratings, 1.0).mu
    ss = an.critical_steady(pa, m.ratings, mu)
    for t in (0.0, 0.5, 1.0):
        assert np.all(np.isfinite(an.ordinary_voltages(ss, t)))


def test_omega_range_boundary(case2, css):
    m = case2.model
    pa = partitioned_admittance(m.net, m.partition)
    for theta in (0.0, 0.5):
        rng = an.omega_range(css, theta)
        at = an.critical_steady(pa, m.ratings, rng.lower)
        assert np.min(an.critical_ipu1(at, theta)) == pytest.approx(0.0, abs=1e-12)
        above = an.critical_steady(pa, m.ratings, rng.lower * 1.01)
        assert np.min(an.critical_ipu1(above, theta)) > 0


def test_omega_grid_ordinary_current_decreasing(case2, css):
    m = case2.model
    pa = partitioned_admittance(m.net, m.partition)
    lo = an.omega_range(css, 0.0).lower
    ipu2 = []
    for w in np.linspace(lo, lo + 3, 25):
        ss = an.critical_steady(pa, m.ratings, w)
        v, i, _ = an.critical_solution(ss, 0.0)
        ipu2.append(i[pa.ordinary] / m.ratings.current_capacity[pa.ordinary])
    assert np.all(np.diff(np.array(ipu2), axis=0) < 0)


def test_nonpositive_nu_rejected(css):
    from dataclasses import replace

    bad = replace(css, upsilon1=css.upsilon1 * np.array([1, -1, 1]))
    with pytest.raises(NonpositiveNu):
        an.omega_range(bad, 0.0)


@given(seeds, st.integers(2, 8), st.floats(0, 1), st.floats(0.2, 4))
@settings(max_examples=20, deadline=None)
def test_closed_form_vs_oracle_random(seed, n, theta, omega):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n, all_loads=False)
    rat = random_ratings(rng, n)
    part = random_partition(rng, n)
    ss = an.critical_steady(partitioned_admittance(net, part), rat, omega)
    ref = an.critical_reference(ss, theta)
    if an.critical_alpha(ss, theta) <= 0 or not np.isfinite(an.critical_alpha(ss, theta)):
        return
    v, i, alpha = an.critical_solution(ss, theta)
    vo, io, ao = steady_state_oracle(net, rat, ref, "critical", part)
    scale = np.max(np.abs(vo))
    assert np.max(np.abs(v - vo)) < 1e-8 * scale
    assert np.max(np.abs(i - io)) < 1e-8 * max(np.max(np.abs(io)), 1e-300)
    assert alpha == pytest.approx(ao, rel=1e-8)


@given(seeds, st.integers(2, 8), st.floats(0.2, 4))
@settings(max_examples=20, deadline=None)
def test_balancing_zero_sums(seed, n, omega):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n)
    rat = random_ratings(rng, n)
    uss = an.uniform_steady(net, rat)
    ss = an.critical_steady(partitioned_admittance(net, random_partition(rng, n)), rat, omega)
    for t in (0.0, 0.4, 1.0):
        assert abs(an.uniform_delta_v(uss, t).sum()) < 1e-10
        if np.isfinite(an.critical_alpha(ss, t)):
            assert abs(an.critical_delta_v(ss, t).sum()) < 1e-10
