"""Coupled SARIMAX modelling of individual load curves.

Log-consumption is regressed on lagged temperature by OLS, the regression
residuals are modelled as a seasonal ARIMA process, and both stages are
combined for intraday multi-step forecasting.
"""

from .errors import DataError, NumericalError, SingularityError
from .series import (
    DifferenceSpec,
    TimeSeries,
    difference,
    integrate,
    inverse_transform,
    log_transform,
)
from .regress import RegressionFit, build_design, ols_fit
from .sarima import (
    FitReport,
    LagPolynomial,
    PsiWeights,
    SarimaxModel,
    SarimaxOrder,
    check_causal,
    coefficient_tstats,
    css_objective,
    expand,
    fit,
    fit_sarimax,
    information_criteria,
    kalman_loglik,
    psi_weights,
)
from .forecast import (
    EvaluationReport,
    ForecastResult,
    GridResult,
    evaluate_rolling,
    grid_search,
    predict,
)

__version__ = "0.1.0"
