import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate, special, stats

from mer_relay.channel import EigenPowerAllocation, SystemConfig, build_constant_correlation
from mer_relay.channel import (instantaneous_capacity_eigen, instantaneous_capacity_scalar,
                               relay_power_used)
from mer_relay.criteria import (
    boundary_db,
    derivative_at_zero,
    expectation_gy_over_z,
    expectation_inv_z,
    find_boundary_db,
    jensen_condition,
    jensen_inner_expectation,
    large_ns_condition,
    mer_allocation,
    mer_exact_condition,
    saturated_derivative_at_zero,
    second_derivative_integrand,
)
from mer_relay.montecarlo import RunningStats, sample_channel

# (P_S dB, P_R dB, rho, n_S) -> E[1/Z], E[(1+gY)/Z], margin, threshold (mpmath, 25 digits)
FROZEN = [
    ((10, 10, 0.5, 2), (0.18572208303644824, 1.5848162165502372,
                        -0.28706015310500433, 0.52213111925925091)),
    ((0, 20, 0.3, 4), (0.031471202535762099, 0.060185934863455673,
                       0.0037929125152673385, 0.053078687585392876)),
    ((20, 5, 0.3, 1), (0.43364214007423419, 28.204237227500187,
                       -8.5465546429464353, 0.80372648788865911)),
]


def make(p_s_db, p_r_db, rho, n_s, n_r=2):
    return SystemConfig.from_db(p_s_db, p_r_db, n_s=n_s, n_r=n_r), \
        build_constant_correlation(rho, n_r)


@pytest.mark.parametrize("args,expected", FROZEN)
def test_frozen_exact_quantities(args, expected):
    cfg, corr = make(*args)
    rep = mer_exact_condition(cfg, corr)
    e_inv, e_gy, margin, threshold = expected
    assert rep.e_inv_z == pytest.approx(e_inv, rel=1e-8)
    assert rep.e_gy_over_z == pytest.approx(e_gy, rel=1e-8)
    assert rep.margin_exact == pytest.approx(margin, rel=1e-7, abs=1e-10)
    assert rep.threshold_exact == pytest.approx(threshold, rel=1e-7)
    assert rep.mer_optimal == (margin <= 0)
    assert rep.mer_optimal == (rep.lambda2_sq <= rep.threshold_exact)
    assert not rep.degenerate


def test_mer_allocation_saturates_budget():
    cfg, corr = make(7, 13, 0.4, 2, n_r=3)
    alloc = mer_allocation(cfg, corr)
    assert relay_power_used(alloc, corr, cfg) == pytest.approx(cfg.p_r, rel=1e-14)
    assert np.all(alloc.gains[1:] == 0)


def _scipy_expectations(total, l1sq, gamma, n_s):
    # independent route: scipy exp1 and gamma pdf with scipy quad
    c = total * l1sq
    pdf = stats.gamma(n_s, scale=1.0 / n_s).pdf

    def inner(t):
        a = 1.0 / (c * (1 + gamma * t))
        return special.exp1(a) * math.exp(a) if a < 700 else 1 / a - 1 / a ** 2

    e_inv = integrate.quad(lambda t: inner(t) / (c * (1 + gamma * t)) * pdf(t), 0, np.inf,
                           epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    e_gy = integrate.quad(lambda t: inner(t) * pdf(t), 0, np.inf,
                          epsabs=1e-13, epsrel=1e-11, limit=200)[0] / c
    return e_inv, e_gy


@settings(max_examples=25, deadline=None)
@given(total=st.floats(0.01, 50), l1sq=st.floats(0.5, 4), gamma=st.floats(0.1, 200),
       n_s=st.integers(1, 6))
def test_expectations_match_scipy(total, l1sq, gamma, n_s):
    e_inv, e_gy = _scipy_expectations(total, l1sq, gamma, n_s)
    assert expectation_inv_z(total, l1sq, gamma, n_s) == pytest.approx(e_inv, rel=1e-7)
    assert expectation_gy_over_z(total, l1sq, gamma, n_s) == pytest.approx(e_gy, rel=1e-7)


def test_expectations_against_mc():
    rng = np.random.default_rng(5)
    total, l1sq, gamma, n_s = 0.6, 2.25, 10.0, 2
    x = rng.exponential(size=1_000_000)
    y = rng.gamma(n_s, 1 / n_s, size=x.size)
    z = 1 + total * l1sq * (1 + gamma * y) * x
    for fn, s in ((expectation_inv_z, 1 / z), (expectation_gy_over_z, (1 + gamma * y) / z)):
        se = s.std() / math.sqrt(s.size)
        assert abs(fn(total, l1sq, gamma, n_s) - s.mean()) < 3 * se


def test_gamma_zero_closed_forms():
    c = 2.0
    k = math.exp(1 / c) * special.exp1(1 / c)
    assert expectation_inv_z(1.0, c, 0.0, 3) == pytest.approx(k / c, rel=1e-13)
    assert expectation_gy_over_z(1.0, c, 0.0, 3) == pytest.approx(k / c, rel=1e-13)


@pytest.mark.parametrize("bad", [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, -1.0)])
def test_expectation_argument_checks(bad):
    with pytest.raises(ValueError):
        expectation_inv_z(*bad, 2)


def _derivative_by_dblquad(cfg, corr):
    # d/dp E[C] at p=0: X2 enters linearly with mean 1
    total = mer_allocation(cfg, corr).total
    a1, a2 = corr.eigvals[0] ** 2, corr.eigvals[1] ** 2
    c, g, n = total * a1, cfg.gamma, cfg.n_s
    pdf = stats.gamma(n, scale=1 / n).pdf

    def f(x, y):
        d = a2 - a1 * x
        b = 1 + g * y
        return (d * b / (1 + c * x * b) - d / (1 + c * x)) * math.exp(-x) * pdf(y)

    return integrate.dblquad(f, 0, np.inf, 0, np.inf, epsabs=1e-11, epsrel=1e-9)[0]


@pytest.mark.parametrize("args", [(10, 10, 0.5, 2), (0, 20, 0.3, 4), (5, 15, 0.3, 2)])
def test_derivative_matches_direct_integral(args):
    cfg, corr = make(*args)
    assert derivative_at_zero(cfg, corr) == pytest.approx(_derivative_by_dblquad(cfg, corr),
                                                          rel=1e-6, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(ps=st.floats(-5, 25), pr=st.floats(-5, 30), rho=st.floats(0.05, 0.9),
       n_s=st.integers(1, 5))
def test_threshold_and_margin_agree(ps, pr, rho, n_s):
    cfg, corr = make(ps, pr, rho, n_s)
    rep = mer_exact_condition(cfg, corr)
    assume(abs(rep.margin_exact) > 1e-9)
    assert rep.mer_optimal == (rep.margin_exact <= 0)
    if not rep.degenerate:
        assert rep.mer_optimal == (rep.lambda2_sq <= rep.threshold_exact)


@settings(max_examples=60, deadline=None)
@given(ps=st.floats(-10, 30), pr=st.floats(-10, 40), rho=st.floats(0.01, 0.95),
       n_s=st.integers(1, 6))
def test_exact_optimality_implies_jensen(ps, pr, rho, n_s):
    # Jensen bounds the expectation from below, so its test is necessary
    cfg, corr = make(ps, pr, rho, n_s)
    rep = mer_exact_condition(cfg, corr)
    if rep.margin_exact <= 0:
        assert rep.jensen_certifies


def test_jensen_inner_expectation_matches_quad():
    total, l1sq, l2sq, gamma, n_s = 0.6, 2.25, 0.25, 10.0, 2
    c = total * l1sq
    pdf = stats.gamma(n_s, scale=1 / n_s).pdf
    ref = integrate.quad(lambda t: (1 + c * (1 + gamma * t)) / (l2sq * (1 + gamma * t)
                                                                 + 1 / total) * pdf(t),
                         0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    assert jensen_inner_expectation(total, l1sq, l2sq, gamma, n_s) == pytest.approx(ref,
                                                                                   rel=1e-11)


def test_jensen_edge_cases():
    cfg, corr = make(10, 10, 0.5, 2)
    with pytest.raises(ValueError):
        jensen_inner_expectation(1.0, 1.0, 0.0, 1.0, 2)
    # gamma = 0: D is infinite and the E_{n+1} term drops out
    zero = SystemConfig(2, 2, 0.0, 10.0)
    res = jensen_condition(zero, corr)
    assert math.isinf(res.d)
    total = mer_allocation(zero, corr).total
    a1, a2 = corr.eigvals[0] ** 2, corr.eigvals[1] ** 2
    assert res.lhs == pytest.approx(total * a1 * a2 * (1 + total * a2) / (a2 * (1 + total * a1)))
    # rank-one correlation: nothing to move power to
    one = build_constant_correlation(0.0, 1)
    assert jensen_condition(SystemConfig(2, 1, 10, 10), one).certifies


def test_large_ns_limit_approaches_exact():
    cfg, corr = make(10, 12, 0.4, 400)
    exact = mer_exact_condition(cfg, corr)
    large = large_ns_condition(cfg, corr)
    assert large.threshold == pytest.approx(exact.threshold_exact, rel=2e-3)
    assert large.a1 == pytest.approx(1 / (exact.total_gain * corr.eigvals[0] ** 2
                                          * (1 + cfg.gamma)))


def test_large_ns_zero_gamma_degenerate():
    corr = build_constant_correlation(0.5, 2)
    res = large_ns_condition(SystemConfig(2, 2, 0.0, 10.0), corr)
    assert res.degenerate and res.threshold == 0.0 and not res.optimal
    rep = mer_exact_condition(SystemConfig(2, 2, 0.0, 10.0), corr)
    assert rep.degenerate
    assert rep.margin_exact == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), p_frac=st.floats(0, 1), ps=st.floats(-10, 30),
       rho=st.floats(0, 0.95), n_s=st.integers(1, 8))
def test_second_derivative_nonpositive(seed, p_frac, ps, rho, n_s):
    cfg, corr = make(ps, 10, rho, n_s)
    rng = np.random.default_rng(seed)
    x = rng.exponential(size=(2, 1000))
    y = rng.gamma(n_s, 1 / n_s, size=1000)
    total = 2.0
    vals = second_derivative_integrand(x[0], x[1], y, p_frac * total, total, cfg, corr)
    assert np.all(vals <= 0)


def test_second_derivative_matches_finite_difference():
    cfg, corr = make(10, 10, 0.5, 3)
    rng = np.random.default_rng(1)
    x = rng.exponential(size=(50, 2))
    y = rng.gamma(3, 1 / 3, size=50)
    total, p, h = 1.3, 0.4, 1e-4

    def cap(q):
        return instantaneous_capacity_scalar(x, y, EigenPowerAllocation(np.array([total - q, q])),
                                             corr, cfg)

    fd = (cap(p + h) - 2 * cap(p) + cap(p - h)) / h ** 2
    exact = second_derivative_integrand(x[:, 0], x[:, 1], y, p, total, cfg, corr)
    np.testing.assert_allclose(exact, fd, rtol=1e-4, atol=1e-7)


def test_saturated_slope_against_mc():
    # move gain along the power budget and difference the capacity on fixed draws;
    # 6 dB lies between the budget-preserving and the fixed-total boundaries
    cfg, corr = make(10, 6, 0.3, 2)
    total = mer_allocation(cfg, corr).total
    lam = corr.eigvals
    ratio = (1 + cfg.p_s * lam[0]) / (1 + cfg.p_s * lam[1])
    h = 1e-3 * total
    a0 = EigenPowerAllocation(np.array([total, 0.0]))
    a1 = EigenPowerAllocation(np.array([total - h, h * ratio]))
    assert relay_power_used(a1, corr, cfg) == pytest.approx(cfg.p_r, rel=1e-12)
    acc = RunningStats()
    for k in range(4):
        d = sample_channel(cfg, 77, k, size=100_000)
        acc.update((instantaneous_capacity_eigen(d, a1, corr, cfg)
                    - instantaneous_capacity_eigen(d, a0, corr, cfg)) / h)
    est = acc.estimate()
    slope = saturated_derivative_at_zero(cfg, corr)
    assert abs(est.mean - slope) < 4 * est.std_error + 5e-3 * abs(slope)
    assert slope > 0 > derivative_at_zero(cfg, corr)


FROZEN_BOUNDARIES = [
    (0, 0.3, 2, 4.46), (10, 0.3, 2, 8.55), (20, 0.3, 2, 12.59),
    (0, 0.5, 2, 11.00), (10, 0.5, 2, 15.94), (20, 0.5, 2, 21.84),
]


@pytest.mark.parametrize("p_s_db,rho,n_s,expected", FROZEN_BOUNDARIES)
def test_exact_boundaries_frozen(p_s_db, rho, n_s, expected):
    b = boundary_db(p_s_db, rho, n_s)
    assert b == pytest.approx(expected, abs=0.02)
    # consistency: just inside is optimal, just outside is not
    inside, _ = make(p_s_db, b - 0.05, rho, n_s)
    outside, corr = make(p_s_db, b + 0.05, rho, n_s)
    assert mer_exact_condition(inside, corr).mer_optimal
    assert not mer_exact_condition(outside, corr).mer_optimal


def test_find_boundary_edges():
    assert find_boundary_db(lambda x: True) == math.inf
    assert find_boundary_db(lambda x: False) == -math.inf
    assert find_boundary_db(lambda x: x < 3.3, tol_db=1e-4) == pytest.approx(3.3, abs=1e-4)
    with pytest.raises(ValueError):
        boundary_db(0, 0.3, 2, criterion="nope")


def test_report_to_dict():
    cfg, corr = make(10, 10, 0.5, 2)
    d = mer_exact_condition(cfg, corr).to_dict()
    assert set(d) >= {"margin_exact", "threshold_exact", "jensen_certifies", "a1", "d"}


def test_large_ns_a1_substitution():
    cfg = SystemConfig(2, 2, 10.0, 10.0)
    corr = build_constant_correlation(0.5, 2)
    assert large_ns_condition(cfg, corr, total=0.625).a1 == pytest.approx(1 / (1.40625 * 11),
                                                                          rel=1e-14)


def test_rank_one_correlation_is_mer_optimal():
    from mer_relay.channel import RelayCorrelation

    corr = RelayCorrelation.from_matrix(np.ones((2, 2)))
    assert corr.eigvals[1] == 0.0
    for pr in (0, 20, 40):
        cfg = SystemConfig.from_db(10, pr, n_s=2, n_r=2)
        assert derivative_at_zero(cfg, corr) < 0
        rep = mer_exact_condition(cfg, corr)
        assert rep.mer_optimal and rep.jensen_certifies and rep.large_ns_optimal


def test_equal_eigenvalues_execute():
    cfg, corr = make(10, 10, 0.0, 2)
    res = jensen_condition(cfg, corr)
    assert math.isfinite(res.lhs) and math.isfinite(res.rhs)
    rep = mer_exact_condition(cfg, corr)
    assert not rep.mer_optimal
