"""Seasonal ARIMA core: polynomials, Kalman likelihood, estimation."""

from .estimate import (
    FitReport,
    SarimaxModel,
    SarimaxOrder,
    coefficient_tstats,
    css_objective,
    fit,
    fit_sarimax,
    information_criteria,
    model_from_text,
    model_to_text,
)
from .kalman import kalman_loglik, run_filter
from .polynomials import (
    CausalityCheck,
    LagPolynomial,
    PsiWeights,
    arma_factors,
    check_causal,
    difference_equation,
    expand,
    psi_weights,
)
