"""Multi-step prediction with known future temperatures, and its evaluation.

The residual forecast comes from the Kalman filter on the differenced
residuals, iterated forward and integrated back; the regression part is
added with the plug-in coefficients. Forecast variances use the psi-weights
of the full (integrated) transfer function.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, NumericalError
from .regress import align, regression_part
from .sarima.estimate import SarimaxModel, SarimaxOrder, fit_sarimax
from .sarima.kalman import run_filter
from .sarima.polynomials import psi_recursion
from .series import (
    DEFAULT_MU,
    TimeSeries,
    difference_values,
    as_series,
    integrate,
    inverse_values,
    log_transform,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForecastResult:
    horizon: int
    times: list
    point_log: np.ndarray
    variance: np.ndarray
    bands_log: dict  # level -> (lower, upper)
    point_consumption: np.ndarray
    bands_consumption: dict
    mu: float

    @property
    def n_negative(self) -> int:
        """Consumption-scale point forecasts below zero (kept, not clamped)."""
        return int(np.sum(self.point_consumption < 0))


@dataclass
class _Prepared:
    eps: np.ndarray
    u_all: np.ndarray
    y_pos: np.ndarray  # positions in u_all of the rows in eps
    dropped: int


def _prepare(model: SarimaxModel, y: TimeSeries, u: TimeSeries | None,
             future_u=None, h: int = 0) -> _Prepared:
    if model.exog_coef is None:
        return _Prepared(y.values.copy(), np.zeros(0), np.arange(len(y)), 0)
    if u is None:
        raise DataError("model has a temperature regression; temperatures are required")
    r = len(model.exog_coef) - 1
    off = u.index_of(y.start)
    end = off + len(y)  # position just after the last history row
    if future_u is None:
        u_all = u.values
    else:
        if isinstance(future_u, TimeSeries) and u.index_of(future_u.start) != end:
            raise DataError("future temperatures must start right after the history")
        u_all = np.concatenate([u.values[:end], np.asarray(future_u, dtype=float).reshape(-1)])
    if u_all.size < end + h:
        raise DataError(
            f"future temperatures cover {u_all.size - end} steps, horizon {h} needs {h}"
        )
    pos, dropped = align(y, TimeSeries(u_all[:end], u.start, u.step), r)
    eps = y.values[dropped:] - regression_part(model.exog_coef, u_all, pos)
    return _Prepared(eps, u_all, pos, dropped)


def predict(model: SarimaxModel, y, u=None, future_u=None, h: int = 24,
            levels=(0.90, 0.95), mu: float | None = None) -> ForecastResult:
    """Forecast log-consumption ``h`` steps past the end of ``y``.

    ``u`` covers the history (earlier values feed the lags); ``future_u``
    holds the next ``h`` temperatures, or may be omitted when ``u`` already
    extends past the history.
    """
    if h < 1:
        raise DataError("forecast horizon must be >= 1")
    y = as_series(y, "log-consumption")
    if u is not None:
        u = as_series(u, "temperature")
    mu = model.mu if mu is None else mu
    mu = DEFAULT_MU if mu is None else mu
    prep = _prepare(model, y, u, future_u, h)
    spec = model.order.diff_spec
    if prep.eps.size <= spec.lost:
        raise DataError(f"history of {prep.eps.size} residuals is too short for {model.order}")
    ar_arma, ma = model.arma_polynomials()
    x = difference_values(prep.eps, spec)
    flt = run_filter(ar_arma, ma, x)
    w = flt.forecast_state(h)
    eps_f = integrate(w, prep.eps[prep.eps.size - spec.lost:], spec).values[spec.lost:]
    if model.exog_coef is not None:
        last = int(prep.y_pos[-1])
        reg = regression_part(model.exog_coef, prep.u_all, np.arange(last + 1, last + 1 + h))
    else:
        reg = np.zeros(h)
    point = reg + eps_f
    ar_full, ma_full = model.polynomials()
    psi = psi_recursion(ar_full, ma_full, h - 1)
    var = model.sigma2 * np.cumsum(psi**2)
    sd = np.sqrt(var)
    bands_log, bands_c = {}, {}
    for lvl in levels:
        z = stats.norm.ppf(0.5 + lvl / 2.0)
        lo, hi = point - z * sd, point + z * sd
        bands_log[lvl] = (lo, hi)
        bands_c[lvl] = (inverse_values(lo, mu), inverse_values(hi, mu))
    times = [y.time_at(len(y) + j) for j in range(h)]
    return ForecastResult(h, times, point, var, bands_log, inverse_values(point, mu),
                          bands_c, mu)


def in_sample(model: SarimaxModel, y, u=None) -> tuple[TimeSeries, np.ndarray]:
    """One-step-ahead fitted log-consumption and the filter innovations.

    The first ``d + D*s`` usable rows have no prediction and are omitted.
    """
    y = as_series(y, "log-consumption")
    prep = _prepare(model, y, as_series(u) if u is not None else None)
    spec = model.order.diff_spec
    ar, ma = model.arma_polynomials()
    x = difference_values(prep.eps, spec)
    flt = run_filter(ar, ma, x, keep=True)
    start = prep.dropped + spec.lost
    fitted = y.values[start:] - flt.innovations
    return y.with_values(fitted, offset=start, label="fitted"), flt.innovations


def prediction_criteria(predicted, actual) -> tuple[float, float]:
    """(C_A, C_R): mean absolute error and total absolute error over total actual."""
    err = np.abs(np.asarray(predicted, dtype=float) - np.asarray(actual, dtype=float))
    total = float(np.sum(actual))
    if err.size == 0:
        raise DataError("no forecasts to score")
    return float(err.mean()), float(err.sum() / total) if total else math.inf


@dataclass
class EvaluationReport:
    order: SarimaxOrder
    c_a: float
    c_r: float
    n: int
    h: int
    m: int
    per_window_errors: list
    c_r_log: float = float("nan")
    failed: list = field(default_factory=list)
    origins: list = field(default_factory=list)
    actual_total: float = 0.0
    abs_error_total: float = 0.0
    forecasts: list = field(default_factory=list)

    @property
    def n_requested(self) -> int:
        return self.n + len(self.failed)

    @property
    def coverage(self) -> float:
        return self.n / self.n_requested if self.n_requested else 0.0

    @property
    def partial(self) -> bool:
        return bool(self.failed)


def evaluate_rolling(c, u, order: SarimaxOrder, m: int, n: int = 14, h: int = 24,
                     mu: float = DEFAULT_MU, origin: int | None = None,
                     **fit_kwargs) -> EvaluationReport:
    """Refit on the last ``m`` points before each origin, forecast ``h`` steps, advance by ``h``.

    ``origin`` is the index in ``c`` of the first forecast; it defaults to
    ``len(c) - n*h`` so that the last ``n*h`` observations are scored.
    """
    c = as_series(c, "consumption")
    u = as_series(u, "temperature")
    if h < 1 or n < 1:
        raise DataError("need h >= 1 and n >= 1")
    if origin is None:
        origin = len(c) - n * h
    if origin < m or origin + n * h > len(c):
        raise DataError(
            f"{len(c)} observations cannot hold a window of {m} plus {n}x{h} forecasts"
        )
    errors, failed, origins, fcs = [], [], [], []
    abs_tot = act_tot = log_abs = log_tot = 0.0
    for i in range(n):
        o = origin + i * h
        train = c.slice(o - m, o)
        actual = c.values[o:o + h]
        try:
            y = log_transform(train, mu)
            model, _, _ = fit_sarimax(y, u, order, **fit_kwargs)
            fc = predict(model, y, u, h=h, levels=(), mu=mu)
        except (DataError, NumericalError, np.linalg.LinAlgError) as exc:
            log.warning("%s window %d (origin %d) failed: %s", order, i, o, exc)
            failed.append((i, str(exc)))
            continue
        err = fc.point_consumption - actual
        errors.append(err)
        origins.append(o)
        fcs.append(fc.point_consumption)
        abs_tot += float(np.abs(err).sum())
        act_tot += float(actual.sum())
        y_act = np.log(actual + math.exp(mu))
        log_abs += float(np.abs(fc.point_log - y_act).sum())
        log_tot += float(y_act.sum())
    if not errors:
        return EvaluationReport(order, math.nan, math.nan, 0, h, m, [], math.nan, failed)
    nh = sum(e.size for e in errors)
    c_a = abs_tot / nh
    c_r = abs_tot / act_tot if act_tot else math.inf
    return EvaluationReport(order, c_a, c_r, len(errors), h, m, errors,
                            log_abs / log_tot, failed, origins, act_tot, abs_tot, fcs)


@dataclass
class GridCell:
    order: SarimaxOrder
    m: int
    report: EvaluationReport

    @property
    def ok(self) -> bool:
        return self.report.n > 0

    def rank_key(self):
        rep = self.report
        return (0 if self.ok else 1, rep.c_r if self.ok else math.inf,
                rep.c_a if self.ok else math.inf, self.order.n_params)


@dataclass
class GridResult:
    ranked: list
    r_values: list
    m_values: list

    @property
    def best(self) -> GridCell:
        return self.ranked[0]

    def cr_matrix(self, order: SarimaxOrder) -> np.ndarray:
        """C_R over (r, M) for ``order`` (its r ignored); NaN where a cell failed."""
        out = np.full((len(self.r_values), len(self.m_values)), np.nan)
        for cell in self.ranked:
            if cell.order.with_r(order.r) != order or not cell.ok:
                continue
            out[self.r_values.index(cell.order.r), self.m_values.index(cell.m)] = cell.report.c_r
        return out


def _run_cell(args):
    c, u, order, m, n, h, mu, kw = args
    return evaluate_rolling(c, u, order, m, n, h, mu, **kw)


def grid_search(c, u, orders, r_values=None, m_values=(730,), n: int = 14, h: int = 24,
                mu: float = DEFAULT_MU, n_jobs: int = 1, **fit_kwargs) -> GridResult:
    """Evaluate every (order, r, M) cell and rank by C_R, then C_A, then parameter count."""
    orders = list(orders)
    m_values = list(m_values)
    if not orders or not m_values or (r_values is not None and not list(r_values)):
        raise DataError("grid must be non-empty")
    cells = []
    for order in orders:
        rs = [order.r] if r_values is None else list(r_values)
        for r in rs:
            for m in m_values:
                cells.append((order.with_r(r), m))
    cells.sort(key=lambda cm: (cm[0].astuple(), cm[1]))
    jobs = [(c, u, o, m, n, h, mu, fit_kwargs) for o, m in cells]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            reports = list(ex.map(_run_cell, jobs))
    else:
        reports = [_run_cell(j) for j in jobs]
    grid = [GridCell(o, m, rep) for (o, m), rep in zip(cells, reports)]
    if not any(cell.ok for cell in grid):
        raise NumericalError("every grid cell failed to produce forecasts")
    grid.sort(key=GridCell.rank_key)
    r_all = sorted({cell.order.r for cell in grid})
    return GridResult(grid, r_all, sorted(set(m_values)))
