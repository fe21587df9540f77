import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdp_audit import accounting, bounds
from rdp_audit.bounds import CriticClassSpec
from rdp_audit.divergence import renyi_bernoulli
from rdp_audit.exceptions import InfeasibleError


# -- Markov -------------------------------------------------------------------


def test_markov_log_one_over_beta_is_one():
    b = bounds.markov_lower_bound(3.0, 2.0, 1 / math.e)
    assert b.lower == pytest.approx(2.0, abs=1e-15)
    assert b.kind == "lower" and b.method == "markov"
    assert b.level == pytest.approx(1 - 1 / math.e)


def test_markov_examples():
    assert bounds.markov_lower_bound(3.0, 2.0, 0.05).lower == pytest.approx(0.0043, abs=5e-5)
    assert bounds.markov_lower_bound(3.0, 2.0, 0.05).lower == pytest.approx(3 - math.log(20), abs=1e-15)
    # negative values are reported unchanged
    low = bounds.markov_lower_bound(3.0, 1.25, 0.05).lower
    assert low == pytest.approx(-8.98, abs=5e-3)


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.1, 1.5])
def test_markov_rejects_bad_beta(beta):
    with pytest.raises(ValueError):
        bounds.markov_lower_bound(1.0, 2.0, beta)


def test_markov_requires_alpha_above_one():
    with pytest.raises(ValueError):
        bounds.markov_lower_bound(1.0, 0.5, 0.05)


# -- Hoeffding ----------------------------------------------------------------


def test_hoeffding_upper_examples():
    up = bounds.hoeffding_upper_bound(1.0, 200, 0.0, 2.0, 0.05).upper
    assert up == pytest.approx(math.log(1 + math.sqrt(math.log(40) / 400)), abs=1e-15)
    assert up == pytest.approx(0.0917, abs=5e-5)

    up = bounds.hoeffding_upper_bound(math.e**2, 800, 1.0, 2.0, 0.1).upper
    expected = math.log(math.e**2 + math.e**2 * math.sqrt(math.log(20) / 1600))
    assert up == pytest.approx(expected, abs=1e-14)
    assert up == pytest.approx(2.0423605, abs=1e-6)


def test_hoeffding_upper_limit():
    assert bounds.hoeffding_upper_bound(1.0, 10**15, 0.0, 2.0, 0.05).upper < 1e-7


def test_hoeffding_lower_examples():
    low = bounds.hoeffding_lower_bound(2.0, 50, 0.0, 2.0, 0.05).lower
    assert low == pytest.approx(math.log(2 - math.sqrt(math.log(20) / 100)), abs=1e-15)
    assert low == pytest.approx(0.6027, abs=1e-4)


@pytest.mark.parametrize("z", [0.0, 0.5, 1.0])
def test_hoeffding_lower_floor_small_z(z):
    assert bounds.hoeffding_lower_bound(z, 100, 0.0, 2.0, 0.05).lower == 0.0


def test_hoeffding_lower_floor_large_b():
    assert bounds.hoeffding_lower_bound(5.0, 100, 3.0, 2.0, 0.05).lower == 0.0


@pytest.mark.parametrize("fn", [bounds.hoeffding_upper_bound, bounds.hoeffding_lower_bound])
def test_hoeffding_errors(fn):
    with pytest.raises(ValueError):
        fn(1.0, 0, 0.0, 2.0, 0.05)
    with pytest.raises(ValueError):
        fn(-1.0, 10, 0.0, 2.0, 0.05)
    with pytest.raises(ValueError):
        fn(1.0, 10, 0.0, 2.0, 1.0)


def test_hoeffding_lower_dominates_markov_at_large_n():
    p, q, alpha, beta, n = 0.8, 0.2, 2.0, 0.05, 10_000
    B = max(abs(math.log(p / q)), abs(math.log((1 - p) / (1 - q))))
    rng = np.random.default_rng(11)
    wins = 0
    trials = 200
    for _ in range(trials):
        x = rng.random(n) < q
        # privacy loss log(p/q) evaluated on X ~ Q
        loss = np.where(x, math.log(p / q), math.log((1 - p) / (1 - q)))
        z = float(np.mean(np.exp(alpha * loss)))
        d_hat = math.log(z) / (alpha - 1)
        h = bounds.hoeffding_lower_bound(z, n, B, alpha, beta).lower
        m = bounds.markov_lower_bound(d_hat, alpha, beta).lower
        wins += h >= m
    assert wins / trials >= 0.95


# -- DV radius and certificate ------------------------------------------------


def test_dv_constant():
    assert bounds.dv_constant(2.0, 1.0) == pytest.approx(4 * math.e**4, rel=1e-15)
    assert bounds.dv_constant(1.25, 1.0) == pytest.approx(4 * math.exp(2.5) * 4, rel=1e-15)


def test_dv_radius_frozen_value():
    spec = CriticClassSpec(10, 1.0, 1.0)
    r = bounds.dv_ci_radius(10**6, spec, 2.0, 0.05, 1e-3)
    expected = 4 * math.e**4 * (math.sqrt((10 * math.log(1000) + math.log(20)) / 1e6) + 1e-3)
    assert r == pytest.approx(expected, rel=1e-14)
    assert r == pytest.approx(2.0724581, rel=1e-6)


def test_dv_radius_default_eta():
    spec = CriticClassSpec(3, 2.0, 0.5)
    n = 40_000
    assert bounds.dv_ci_radius(n, spec, 2.0, 0.05) == bounds.dv_ci_radius(n, spec, 2.0, 0.05, n**-0.5)


def test_dv_radius_vanishes():
    spec = CriticClassSpec(10, 1.0, 1.0)
    radii = [bounds.dv_ci_radius(10**k, spec, 2.0, 0.05) for k in (4, 8, 12, 16)]
    assert all(a > b for a, b in zip(radii, radii[1:]))
    assert radii[-1] < 1e-3


def test_dv_radius_monotone_in_d():
    r1 = bounds.dv_ci_radius(10**6, CriticClassSpec(10, 1.0, 1.0), 2.0, 0.05)
    r2 = bounds.dv_ci_radius(10**6, CriticClassSpec(20, 1.0, 1.0), 2.0, 0.05)
    assert r2 > r1


def test_dv_radius_errors():
    spec = CriticClassSpec(1, 1.0, 1.0)
    with pytest.raises(ValueError):
        bounds.dv_ci_radius(0, spec, 2.0, 0.05)
    with pytest.raises(ValueError):
        bounds.dv_ci_radius(100, spec, 2.0, 1.0)
    with pytest.raises(ValueError):
        bounds.dv_ci_radius(100, spec, 2.0, 0.05, eta=1.0)


@pytest.mark.parametrize("args", [(0, 1.0, 1.0), (2.5, 1.0, 1.0), (1, 0.0, 1.0), (1, 1.0, -1.0)])
def test_class_spec_validation(args):
    with pytest.raises(ValueError):
        CriticClassSpec(*args)


def test_dv_certificate():
    assert bounds.dv_certificate(1.3, 0.0).lower == 1.3
    c = bounds.dv_certificate(1.2, 0.3, 0.05)
    assert c.lower == pytest.approx(0.9) and c.upper == pytest.approx(1.5)
    assert c.level == pytest.approx(0.95) and c.method == "dv_covering"
    with pytest.raises(ValueError):
        bounds.dv_certificate(1.0, -0.1)


# -- violation epsilon, hypothesis test ---------------------------------------


def test_violation_epsilon():
    assert bounds.violation_epsilon(2.0, 2.0, 1e-5) == pytest.approx(2 + math.log(1e5), abs=1e-12)
    assert bounds.violation_epsilon(2.0, 2.0, 1e-5) == pytest.approx(13.513, abs=5e-4)


@given(
    lcb=st.floats(0, 50),
    alpha=st.floats(1.01, 64),
    delta=st.floats(1e-12, 0.5),
)
def test_violation_epsilon_matches_rdp_conversion(lcb, alpha, delta):
    ve = bounds.violation_epsilon(lcb, alpha, delta)
    conv = accounting.rdp_to_approx_dp(accounting.RDP(alpha, lcb), delta).eps
    assert ve == pytest.approx(conv, rel=1e-12, abs=1e-12)


def test_hypothesis_test_examples():
    dec = bounds.hypothesis_test(5.0, 1.0, 2.0, 0.05)
    assert dec.sup_rejectable_epsilon == pytest.approx(2.004, abs=5e-4)
    assert dec.reject_null
    for beta in (0.01, 0.5, 0.99):
        assert not bounds.hypothesis_test(1.7, 1.7, 2.0, beta).reject_null


def test_hypothesis_test_exactness_random_tuples():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        d_hat = rng.uniform(-2, 20)
        eps = rng.uniform(0, 20)
        alpha = rng.uniform(1.05, 32)
        beta = rng.uniform(1e-4, 0.99)
        dec = bounds.hypothesis_test(d_hat, eps, alpha, beta)
        assert dec.sup_rejectable_epsilon == d_hat - math.log(1 / beta) / (alpha - 1)
        assert dec.reject_null == (dec.sup_rejectable_epsilon > eps)


@given(
    d_hat=st.floats(-5, 30),
    e1=st.floats(0, 30),
    e2=st.floats(0, 30),
    beta=st.floats(1e-3, 0.9),
)
def test_hypothesis_test_nesting(d_hat, e1, e2, beta):
    lo, hi = sorted((e1, e2))
    if bounds.hypothesis_test(d_hat, hi, 2.0, beta).reject_null:
        assert bounds.hypothesis_test(d_hat, lo, 2.0, beta).reject_null


# -- planner ------------------------------------------------------------------


def test_n_floor_example():
    _, n_floor = bounds.required_samples(0.1, CriticClassSpec(100, 1.0, 0.01), 2.0, 0.05)
    assert n_floor == 10_000


def test_n_upper_is_minimal():
    spec = CriticClassSpec(5, 2.0, 0.1)
    n_upper, _ = bounds.required_samples(0.5, spec, 2.0, 0.05)
    assert bounds.dv_ci_radius(n_upper, spec, 2.0, 0.05) <= 0.5
    assert bounds.dv_ci_radius(n_upper - 1, spec, 2.0, 0.05) > 0.5


def test_n_upper_antitone_in_target():
    spec = CriticClassSpec(5, 2.0, 0.1)
    ns = [bounds.required_samples(t, spec, 2.0, 0.05)[0] for t in (0.2, 0.5, 1.0, 2.0)]
    assert all(a >= b for a, b in zip(ns, ns[1:]))
    assert ns[0] > ns[-1]


def test_n_upper_at_least_floor_random_specs():
    rng = np.random.default_rng(21)
    for _ in range(20):
        spec = CriticClassSpec(int(rng.integers(1, 200)), float(rng.uniform(0.5, 10)), float(rng.uniform(0.01, 1.0)))
        alpha = float(rng.uniform(1.1, 4.0))
        target = float(rng.uniform(0.05, 2.0))
        n_upper, n_floor = bounds.required_samples(target, spec, alpha, 0.05)
        assert n_upper >= n_floor


def test_planner_infeasible():
    with pytest.raises(InfeasibleError):
        bounds.required_samples(1e-3, CriticClassSpec(10, 1.0, 50.0), 2.0, 0.05)
    with pytest.raises(ValueError):
        bounds.required_samples(0.0, CriticClassSpec(10, 1.0, 1.0), 2.0, 0.05)


# -- coverage (small-scale versions of the acceptance checks) -----------------


def test_markov_coverage_small():
    rng = np.random.default_rng(3)
    alpha, beta, n, trials = 2.0, 0.05, 100, 1000
    true = 1.0  # N(1,1) || N(0,1)
    exceed = 0
    for _ in range(trials):
        x = rng.normal(0.0, 1.0, n)  # X ~ Q = N(0,1), loss log(p/q) = x - 1/2
        z = np.mean(np.exp(alpha * (x - 0.5)))
        d_hat = math.log(z) / (alpha - 1)
        exceed += bounds.markov_lower_bound(d_hat, alpha, beta).lower > true
    assert exceed / trials <= beta + 2 * math.sqrt(beta * (1 - beta) / trials)


def test_hoeffding_bernoulli_true_value_sanity():
    # Z = E_Q[(p/q)^alpha] for the channel used in the coverage checks
    p, q = 0.8, 0.2
    z = q * (p / q) ** 2 + (1 - q) * ((1 - p) / (1 - q)) ** 2
    assert math.log(z) == pytest.approx(renyi_bernoulli(p, q, 2.0), rel=1e-14)
