"""Least-squares regression of log-consumption on lagged temperature.

Row ``t`` of the design is ``[1, U_t, U_{t-1}, ..., U_{t-r+1}]``. Rows run
in ascending time; least squares does not care about row order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, SingularityError
from .series import TimeSeries, as_series

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray  # c_0, c_1..c_r
    residuals: TimeSeries
    r: int
    design_condition: float
    dropped: int = 0  # leading rows lost for want of temperature history

    @property
    def n_params(self) -> int:
        return self.r + 1

    def predict_rows(self, design: np.ndarray) -> np.ndarray:
        return design @ self.coefficients


def build_design(u, t_range, r: int) -> np.ndarray:
    """Design rows for positions ``t_range`` (0-based indices into ``u``)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    u = np.asarray(u, dtype=float).reshape(-1)
    t = np.asarray(list(t_range), dtype=int)
    if t.size and r > 0:
        earliest = int(t.min()) - r + 1
        if earliest < 0:
            raise DataError(
                f"temperature history too short: index {earliest} is required "
                f"for r = {r}"
            )
        if t.max() >= u.size:
            raise DataError(f"temperature missing at index {int(t.max())}")
    cols = [np.ones(t.size)] + [u[t - k] for k in range(r)]
    return np.column_stack(cols)


def align(y: TimeSeries, u: TimeSeries, r: int) -> tuple[np.ndarray, int]:
    """Positions in ``u`` of the usable rows of ``y`` and how many were dropped.

    ``u`` may start before ``y`` (pre-sample temperatures feed the lags) and
    must cover every time of ``y``.
    """
    off = u.index_of(y.start)
    if off < 0:
        raise DataError("temperature starts after consumption; cannot align")
    if off + len(y) > len(u):
        raise DataError("temperature does not cover the consumption period")
    pos = off + np.arange(len(y))
    first_ok = max(r - 1, 0)
    keep = pos >= first_ok
    return pos[keep], int(np.sum(~keep))


def ols_fit(y, u, r: int = 1) -> RegressionFit:
    """Regress ``y`` on ``[1, U_t .. U_{t-r+1}]``; returns residuals on the usable rows."""
    y = as_series(y, "log-consumption")
    u = as_series(u, "temperature")
    pos, dropped = align(y, u, r)
    U = build_design(u.values, pos, r)
    Y = y.values[dropped:]
    if Y.size <= U.shape[1]:
        raise DataError(f"{Y.size} rows cannot identify {U.shape[1]} coefficients")
    sv = np.linalg.svd(U, compute_uv=False)
    cond = np.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
    if cond > MAX_CONDITION:
        raise SingularityError(
            f"U'U is near-singular (condition {cond:.3g}); lagged temperatures are "
            f"too collinear for r = {r}, try a smaller r"
        )
    coef = np.linalg.lstsq(U, Y, rcond=None)[0]
    resid = Y - U @ coef
    return RegressionFit(coef, y.with_values(resid, offset=dropped, label="residuals"),
                         r, cond, dropped)


def regression_part(coef: np.ndarray, u: np.ndarray, positions) -> np.ndarray:
    """``c_0 + sum_k c_k U_{t-k+1}`` for each position."""
    r = len(coef) - 1
    return build_design(u, positions, r) @ np.asarray(coef, dtype=float)
