import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from scipy import linalg, signal, stats

from loadsarimax import DataError, NumericalError
from loadsarimax.sarima import (
    LagPolynomial,
    SarimaxModel,
    SarimaxOrder,
    check_causal,
    coefficient_tstats,
    css_objective,
    difference_equation,
    expand,
    fit,
    information_criteria,
    kalman_loglik,
    model_from_text,
    model_to_text,
    psi_weights,
)
from loadsarimax.sarima.estimate import coeffs_to_pacf, pacf_to_coeffs
from loadsarimax.simulate import simulate_sarima


def autocov_oracle(ar, ma, n, terms=4000):
    """gamma(0..n-1) for ar(B) x = ma(B) V, unit variance, via an impulse response."""
    impulse = np.zeros(terms)
    impulse[0] = 1.0
    psi = signal.lfilter(ma, ar, impulse)
    return np.array([psi[: terms - k] @ psi[k:] for k in range(n)])


def dense_loglik(ar, ma, sigma2, x):
    g = autocov_oracle(ar, ma, len(x)) * sigma2
    return stats.multivariate_normal(np.zeros(len(x)), linalg.toeplitz(g)).logpdf(x)


# -- polynomials --------------------------------------------------------------

def test_expand_trivial():
    ar, ma = expand(SarimaxOrder(0, 0, 0, 0, 0, 0, 0, 1))
    assert list(ar.coeffs) == [1.0] and list(ma.coeffs) == [1.0]


def _check_expansion(ar, ma, eps_expected, v_expected):
    eps, v = difference_equation(ar, ma)
    assert set(eps) == set(eps_expected) and set(v) == set(v_expected)
    for k in eps_expected:
        assert sp.expand(eps[k] - eps_expected[k]).is_zero
    for k in v_expected:
        assert sp.expand(v[k] - v_expected[k]).is_zero


def test_expand_seasonal_ar1_symbolic():
    a1, b1 = sp.symbols("a1 beta1")
    ar, ma = expand(SarimaxOrder(1, 0, 0, 2, 0, 1, 1, 24), [a1], [], [], [b1])
    # eps_t = eps_{t-24} + a1 (eps_{t-1} - eps_{t-25}) + V_t - beta1 V_{t-24}
    _check_expansion(ar, ma, {24: 1, 1: a1, 25: -a1}, {0: 1, 24: -b1})


def test_expand_arma32_seasonal_symbolic():
    a1, a2, a3, b1, b2, be = sp.symbols("a1 a2 a3 b1 b2 beta1")
    ar, ma = expand(SarimaxOrder(3, 0, 2, 2, 0, 1, 1, 24), [a1, a2, a3], [b1, b2], [], [be])
    _check_expansion(
        ar, ma,
        {24: 1, 1: a1, 25: -a1, 2: a2, 26: -a2, 3: a3, 27: -a3},
        {0: 1, 1: -b1, 2: -b2, 24: -be, 25: be * b1, 26: be * b2},
    )


def test_expand_numeric_exact():
    a, b, beta = [0.4776, 0.9030, -0.4305], [0.0801, -0.8524], [-0.8125]
    ar, ma = expand(SarimaxOrder(3, 0, 2, 2, 0, 1, 1, 24), a, b, [], beta)
    eps, v = difference_equation(ar, ma)
    assert eps == {24: 1.0, 1: a[0], 25: -a[0], 2: a[1], 26: -a[1], 3: a[2], 27: -a[2]}
    assert v == {0: 1.0, 1: -b[0], 2: -b[1], 24: -beta[0],
                 25: beta[0] * b[0], 26: beta[0] * b[1]}


@given(st.integers(0, 3), st.lists(st.floats(-2, 2), max_size=4))
def test_expand_factors_commute(d, a):
    A = LagPolynomial.from_params(a)
    Dp = LagPolynomial.differencing(d, 0, 1)
    np.testing.assert_allclose((Dp * A).coeffs, (A * Dp).coeffs, atol=1e-12)


def test_check_causal_examples():
    res = check_causal(LagPolynomial([1, -0.5]))
    assert res.causal and res.moduli[0] == pytest.approx(2.0)
    assert not check_causal(LagPolynomial([1, -1.0])).causal
    assert check_causal(LagPolynomial([1.0])).causal


def test_check_causal_paper_polynomials():
    A = LagPolynomial.from_params([0.4776, 0.9030, -0.4305])
    res = check_causal(A)
    assert res.causal
    # Vieta: product of roots of 0.4305 z^3 - 0.903 z^2 - 0.4776 z + 1 is -1/0.4305
    assert np.prod(res.roots).real == pytest.approx(-1 / 0.4305)
    for z in res.roots:
        assert abs(np.polyval(A.coeffs[::-1], z)) < 1e-10
    assert check_causal(LagPolynomial.from_params([0.3540])).causal


def test_psi_examples():
    np.testing.assert_array_equal(psi_weights(LagPolynomial([1.0]), LagPolynomial([1.0]), 3).weights,
                                  [1, 0, 0, 0])
    np.testing.assert_allclose(psi_weights(LagPolynomial([1, -0.5]), LagPolynomial([1.0]), 5).weights,
                               0.5 ** np.arange(6))
    np.testing.assert_allclose(psi_weights(LagPolynomial([1, -0.5]), LagPolynomial([1, 0.5]), 3).weights,
                               [1, 1.0, 0.5, 0.25])


def test_psi_noncausal_rejected():
    with pytest.raises(NumericalError):
        psi_weights(LagPolynomial([1, -1.2]), LagPolynomial([1.0]), 5)


def test_psi_auto_truncation():
    w = psi_weights(LagPolynomial([1, -0.9]), LagPolynomial([1.0]))
    assert w.weights[0] == 1 and abs(w.weights[-1]) < 1e-8


@given(st.lists(st.floats(-0.9, 0.9), min_size=0, max_size=3),
       st.lists(st.floats(-2, 2), max_size=3), st.integers(1, 30))
def test_psi_solves_convolution(r, ma_params, n):
    ar = LagPolynomial.from_params(pacf_to_coeffs(np.array(r)))
    ma = LagPolynomial.from_params(ma_params)
    psi = psi_weights(ar, ma, n).weights
    conv = np.convolve(ar.coeffs, psi)[: n + 1]
    target = np.zeros(n + 1)
    target[: min(len(ma), n + 1)] = ma.coeffs[: n + 1]
    np.testing.assert_allclose(conv, target, atol=1e-9)


# -- Kalman likelihood --------------------------------------------------------

def test_loglik_white_noise_at_zero():
    ll = kalman_loglik(LagPolynomial([1.0]), LagPolynomial([1.0]), 1.0, [0.0])
    assert ll == pytest.approx(-0.5 * math.log(2 * math.pi))


def test_loglik_ar1_dense(rng):
    x = rng.normal(size=5)
    a = 0.5
    g = a ** np.arange(5) / (1 - a**2)
    dense = stats.multivariate_normal(np.zeros(5), linalg.toeplitz(g)).logpdf(x)
    assert kalman_loglik(LagPolynomial([1, -a]), LagPolynomial([1.0]), 1.0, x) == pytest.approx(dense, abs=1e-8)


def test_loglik_ma1_dense(rng):
    x = rng.normal(size=5)
    s2 = 0.7
    g = np.array([1.25, 0.5, 0, 0, 0]) * s2
    dense = stats.multivariate_normal(np.zeros(5), linalg.toeplitz(g)).logpdf(x)
    assert kalman_loglik(LagPolynomial([1.0]), LagPolynomial([1, 0.5]), s2, x) == pytest.approx(dense, abs=1e-8)


@given(st.lists(st.floats(-0.95, 0.95), max_size=2), st.lists(st.floats(-0.95, 0.95), max_size=2),
       st.floats(0.1, 3.0), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_loglik_matches_dense(r_ar, r_ma, s2, n, seed):
    ar = LagPolynomial.from_params(pacf_to_coeffs(np.array(r_ar)))
    ma = LagPolynomial.from_params(pacf_to_coeffs(np.array(r_ma)))
    x = np.random.default_rng(seed).normal(size=n) * math.sqrt(s2)
    assert kalman_loglik(ar, ma, s2, x) == pytest.approx(dense_loglik(ar.coeffs, ma.coeffs, s2, x), abs=1e-6)


def test_loglik_seasonal_dense(rng):
    ar = LagPolynomial.from_params([0.5])
    ma = LagPolynomial.from_params([0.6], step=4)
    x = rng.normal(size=30)
    assert kalman_loglik(ar, ma, 1.0, x) == pytest.approx(dense_loglik(ar.coeffs, ma.coeffs, 1.0, x), abs=1e-6)


def test_loglik_nonfinite_reports_index():
    with pytest.raises(NumericalError, match="time index 1"):
        kalman_loglik(LagPolynomial([1.0]), LagPolynomial([1.0]), 1.0, np.array([0.0, np.nan]))


# -- CSS ----------------------------------------------------------------------

def test_css_no_terms(rng):
    x = rng.normal(size=10)
    assert css_objective(LagPolynomial([1.0]), LagPolynomial([1.0]), x) == pytest.approx(x @ x)


def test_css_ar1_hand():
    assert css_objective(LagPolynomial([1, -0.5]), LagPolynomial([1.0]), [1.0, 1.0]) == pytest.approx(1.25)


def test_css_rejects_noncausal():
    with pytest.raises(DataError):
        css_objective(LagPolynomial([1, -1.0]), LagPolynomial([1.0]), [1.0, 1.0])


# -- parameterization ---------------------------------------------------------

@given(st.lists(st.floats(-0.99, 0.99), min_size=1, max_size=5))
def test_pacf_parameterization_roundtrip_and_causal(r):
    c = pacf_to_coeffs(np.array(r))
    assert check_causal(LagPolynomial.from_params(c)).causal
    np.testing.assert_allclose(coeffs_to_pacf(c), r, atol=1e-6)


# -- information criteria / t statistics --------------------------------------

def test_information_criteria_table_row():
    aic, sbc = information_criteria(238.6, 10, 4380)
    assert aic == pytest.approx(-457.2, abs=1e-9)
    assert sbc == pytest.approx(-393.3, abs=0.1)


def test_information_criteria_zero():
    assert information_criteria(0.0, 0, 1) == (0.0, 0.0)


def _model(a=(0.5,), stderr=None):
    return SarimaxModel(SarimaxOrder(len(a), 0, 0, 0, 0, 0, 0, 1), list(a), [], [], [], 1.0,
                        stderr=stderr)


def test_tstats():
    assert coefficient_tstats(_model((0.5,), {"a1": 0.25})) == {"a1": 2.0}
    assert coefficient_tstats(_model((0.0,), {"a1": 0.3})) == {"a1": 0.0}
    with pytest.raises(NumericalError):
        coefficient_tstats(_model((0.5,), {"a1": 0.0}))
    with pytest.raises(NumericalError):
        coefficient_tstats(_model((0.5,), None))


def test_order_parameter_count():
    assert SarimaxOrder(3, 0, 2, 2, 0, 1, 1, 24).n_params == 10
    assert SarimaxOrder(1, 0, 0, 1, 0, 1, 1, 24).n_params == 5
    assert SarimaxOrder.parse("1,0,0,2,0,1,1,24") == SarimaxOrder(1, 0, 0, 2, 0, 1, 1, 24)
    with pytest.raises(ValueError):
        SarimaxOrder(0, 0, 0, 0, 1, 0, 0, 1)


# -- estimation ---------------------------------------------------------------

def test_fit_white_noise_closed_form(rng):
    x = rng.normal(size=300)
    x -= x.mean()
    model, report = fit(x, SarimaxOrder(0, 0, 0, 0, 0, 0, 0, 1))
    assert model.sigma2 == pytest.approx(np.var(x), rel=1e-12)
    aic, sbc = information_criteria(report.loglik, report.k, report.t)
    assert (report.aic, report.sbc) == (aic, sbc)


def test_fit_ar1_recovery_and_tstats(rng):
    order = SarimaxOrder(1, 0, 0, 0, 0, 0, 0, 1)
    hits = big_t = 0
    for _ in range(100):
        x = simulate_sarima(order, 2000, a=[0.7], seed=rng)
        model, _ = fit(x, order)
        hits += 0.65 <= model.a[0] <= 0.75
        big_t += abs(coefficient_tstats(model)["a1"]) > 10
    assert hits >= 95
    assert big_t >= 95


def test_fit_seasonal_recovery(rng):
    order = SarimaxOrder(1, 0, 0, 0, 0, 1, 1, 12)
    hits = 0
    for _ in range(50):
        x = simulate_sarima(order, 1200, a=[0.5], beta=[0.6], seed=rng)
        model, report = fit(x, order)
        hits += abs(model.a[0] - 0.5) <= 0.1 and abs(model.beta[0] - 0.6) <= 0.1
        ar, _ = model.arma_polynomials()
        assert check_causal(ar).causal
        assert report.aic == information_criteria(report.loglik, report.k, report.t)[0]
    assert hits >= 45


def test_nested_likelihoods(rng):
    x = simulate_sarima(SarimaxOrder(2, 0, 1, 0, 0, 0, 0, 1), 800, a=[0.5, -0.3], b=[0.4], seed=rng)
    lls = [fit(x, SarimaxOrder(p, 0, q, 0, 0, 0, 0, 1))[0].loglik
           for p, q in [(1, 0), (2, 0), (2, 1)]]
    assert lls[1] >= lls[0] - 1e-4
    assert lls[2] >= lls[1] - 1e-4


def test_fit_too_short():
    with pytest.raises(DataError, match="too few"):
        fit(np.arange(30.0), SarimaxOrder(1, 0, 0, 0, 0, 1, 1, 12))


def test_fit_nonconvergence_flagged(rng):
    x = simulate_sarima(SarimaxOrder(2, 0, 1, 0, 0, 0, 0, 1), 500, a=[0.5, -0.3], b=[0.4], seed=rng)
    model, report = fit(x, SarimaxOrder(2, 0, 1, 0, 0, 0, 0, 1), max_iter=1)
    assert not model.converged and not report.converged


def test_model_text_roundtrip(rng):
    x = simulate_sarima(SarimaxOrder(1, 0, 0, 0, 0, 1, 1, 12), 400, a=[0.5], beta=[0.6], seed=rng)
    model, _ = fit(x, SarimaxOrder(1, 0, 0, 1, 0, 1, 1, 12))
    from dataclasses import replace
    model = replace(model, exog_coef=np.array([7.1, 0.05]), mu=5.0, window=548)
    back = model_from_text(model_to_text(model))
    assert back.order == model.order
    np.testing.assert_array_equal(back.a, model.a)
    np.testing.assert_array_equal(back.exog_coef, model.exog_coef)
    assert back.sigma2 == model.sigma2 and back.stderr == model.stderr
    assert back.window == 548 and back.mu == 5.0


def test_model_text_malformed():
    with pytest.raises(DataError):
        model_from_text("order = 1,0,0\n")
