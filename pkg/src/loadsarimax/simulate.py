"""Seeded simulators for SARIMA residuals, temperatures and load curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np
from scipy import signal

from .regress import regression_part
from .sarima.estimate import SarimaxOrder
from .sarima.polynomials import arma_factors
from .series import TimeSeries, integrate, DifferenceSpec


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_arma(ar, ma, n: int, sigma2: float = 1.0, seed=None, burn: int = 500) -> np.ndarray:
    """Stationary ``ar(B) x = ma(B) V`` with Gaussian V, after a burn-in."""
    rng = _rng(seed)
    arc = np.asarray(getattr(ar, "coeffs", ar), dtype=float)
    mac = np.asarray(getattr(ma, "coeffs", ma), dtype=float)
    v = rng.normal(scale=math.sqrt(sigma2), size=n + burn)
    return signal.lfilter(mac, arc, v)[burn:]


def seasonal_profile(s: int, amplitude: float = 0.5) -> np.ndarray:
    """A smooth daily-shaped pattern of period ``s`` (two harmonics)."""
    t = np.arange(s)
    return amplitude * (np.sin(2 * np.pi * t / s) + 0.5 * np.cos(4 * np.pi * t / s + 1.0))


def simulate_sarima(order: SarimaxOrder, n: int, a=(), b=(), alpha=(), beta=(),
                    sigma2: float = 1.0, seed=None, initial=None,
                    profile_amplitude: float = 0.5) -> np.ndarray:
    """Integrated seasonal ARIMA path of length ``n``.

    The ``d + D*s`` starting values default to a seasonal profile (zeros when
    there is no seasonal differencing).
    """
    rng = _rng(seed)
    spec = order.diff_spec
    ar, ma = arma_factors(order.s, a, b, alpha, beta)
    w = simulate_arma(ar, ma, n - spec.lost, sigma2, rng)
    if spec.lost == 0:
        return w
    if initial is None:
        initial = np.zeros(spec.lost)
        if spec.D:
            initial[:] = np.resize(seasonal_profile(order.s, profile_amplitude), spec.lost)
    return integrate(w, initial, spec).values


def simulate_temperature(n: int, seed=None, period: int = 24, mean: float = 10.0,
                         daily_amplitude: float = 4.0, persistence: float = 0.995,
                         anomaly_sd: float = 0.4) -> np.ndarray:
    """Daily cycle plus a slowly varying AR(1) weather anomaly."""
    rng = _rng(seed)
    t = np.arange(n)
    anomaly = signal.lfilter([1.0], [1.0, -persistence],
                             rng.normal(scale=anomaly_sd, size=n + 2000))[2000:]
    return mean + daily_amplitude * np.sin(2 * np.pi * (t - 9) / period) + anomaly


@dataclass
class SyntheticLoad:
    consumption: TimeSeries
    temperature: TimeSeries  # hourly, with r - 1 pre-sample values
    log_consumption: TimeSeries
    residuals: np.ndarray
    order: SarimaxOrder
    exog_coef: np.ndarray


def simulate_load(order: SarimaxOrder, n: int, exog_coef, a=(), b=(), alpha=(), beta=(),
                  sigma2: float = 0.05, mu: float = 5.0, seed=None,
                  start: datetime = datetime(2020, 1, 1),
                  step: timedelta = timedelta(hours=1),
                  profile_amplitude: float = 0.5, **temp_kwargs) -> SyntheticLoad:
    """Hourly consumption from the coupled model with the given parameters.

    ``exog_coef = (c_0, c_1, .., c_r)``. Consumption is ``e^Y - e^mu``; any
    negative draw is clipped at zero (choose ``c_0`` well above ``mu``).
    """
    rng = _rng(seed)
    exog_coef = np.asarray(exog_coef, dtype=float)
    r = exog_coef.size - 1
    pre = max(r - 1, 0)
    u = simulate_temperature(n + pre, rng, period=order.s if order.s > 1 else 24, **temp_kwargs)
    eps = simulate_sarima(order, n, a, b, alpha, beta, sigma2, rng,
                          profile_amplitude=profile_amplitude)
    y = regression_part(exog_coef, u, np.arange(pre, pre + n)) + eps
    c = np.maximum(np.exp(y) - math.exp(mu), 0.0)
    return SyntheticLoad(
        TimeSeries(c, start, step, "consumption"),
        TimeSeries(u, start - pre * step, step, "temperature"),
        TimeSeries(y, start, step, "log-consumption"),
        eps, order, exog_coef,
    )
