"""Exact Gaussian ARMA likelihood by the Kalman prediction-error decomposition.

State-space form with state dimension ``m = max(p, q + 1)``::

    alpha_{t+1} = T alpha_t + R V_t,    x_t = alpha_t[0]

where ``T`` has ``phi`` (AR coefficients, ``x_t = sum phi_k x_{t-k} + ...``)
in its first column and ones on the superdiagonal, and
``R = (1, theta_1, .., theta_{m-1})`` with ``theta`` the MA polynomial
coefficients. The initial state covariance is the stationary one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import NumericalError

LOG_2PI = math.log(2 * math.pi)
# P is frozen once its elementwise change falls below this (relative)
STEADY_TOL = 1e-13
DOUBLING_TOL = 1e-15
DOUBLING_MAX = 64


def state_space(ar, ma) -> tuple[np.ndarray, np.ndarray]:
    """(phi, R) for AR polynomial ``ar`` and MA polynomial ``ma``."""
    arc = np.asarray(getattr(ar, "coeffs", ar), dtype=float)
    mac = np.asarray(getattr(ma, "coeffs", ma), dtype=float)
    p, q = arc.size - 1, mac.size - 1
    m = max(p, q + 1, 1)
    phi = np.zeros(m)
    phi[:p] = -arc[1:]
    R = np.zeros(m)
    R[: q + 1] = mac
    return phi, R


def stationary_cov(phi: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Solve ``P = T P T' + R R'`` by doubling: ``P = sum_k T^k R R' T'^k``.

    Exact after a few squarings when ``T`` is nilpotent (pure MA), and
    quadratically convergent whenever the AR side is causal.
    """
    m = phi.size
    A = np.zeros((m, m))
    A[:, 0] = phi
    A[np.arange(m - 1), np.arange(1, m)] = 1.0
    P = np.outer(R, R)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(DOUBLING_MAX):
            step = A @ P @ A.T
            P = P + step
            if not np.all(np.isfinite(P)):
                break
            if not np.any(np.abs(step) > DOUBLING_TOL * np.abs(P).max()):
                break
            A = A @ A
        else:
            P = None
    if P is None:
        raise NumericalError("stationary state covariance did not converge (AR root near 1)")
    if not np.all(np.isfinite(P)):
        raise NumericalError("stationary state covariance is not finite")
    return 0.5 * (P + P.T)


@numba.njit(cache=True)
def _filter(phi, R, P0, y, keep):
    m = phi.size
    n = y.size
    a = np.zeros(m)
    P = P0.copy()
    RR = np.outer(R, R)
    TP = np.empty((m, m))
    Pn = np.empty((m, m))
    K = np.empty(m)
    an = np.empty(m)
    v_out = np.zeros(n if keep else 0)
    f_out = np.zeros(n if keep else 0)
    sum_logf = 0.0
    sum_v2f = 0.0
    steady = False
    for t in range(n):
        F = P[0, 0]
        if not (F > 0.0) or not np.isfinite(F):
            return sum_logf, sum_v2f, a, P, v_out, f_out, t
        v = y[t] - a[0]
        if not np.isfinite(v):
            return sum_logf, sum_v2f, a, P, v_out, f_out, t
        sum_logf += math.log(F)
        sum_v2f += v * v / F
        if keep:
            v_out[t] = v
            f_out[t] = F
        for i in range(m):
            tp0 = phi[i] * P[0, 0]
            if i + 1 < m:
                tp0 += P[i + 1, 0]
            K[i] = tp0 / F
        for i in range(m):
            s = phi[i] * a[0] + K[i] * v
            if i + 1 < m:
                s += a[i + 1]
            an[i] = s
        for i in range(m):
            a[i] = an[i]
        if steady:
            continue
        for i in range(m):
            for j in range(m):
                s = phi[i] * P[0, j]
                if i + 1 < m:
                    s += P[i + 1, j]
                TP[i, j] = s
        diff = 0.0
        scale = 0.0
        for i in range(m):
            for j in range(m):
                s = TP[i, 0] * phi[j]
                if j + 1 < m:
                    s += TP[i, j + 1]
                s += RR[i, j] - K[i] * K[j] * F
                Pn[i, j] = s
                d = abs(s - P[i, j])
                if d > diff:
                    diff = d
                if abs(s) > scale:
                    scale = abs(s)
        for i in range(m):
            for j in range(m):
                P[i, j] = Pn[i, j]
        if diff <= STEADY_TOL * scale:
            steady = True
    return sum_logf, sum_v2f, a, P, v_out, f_out, -1


@dataclass(frozen=True)
class FilterOutput:
    """Unit-variance filter run; multiply ``F`` and ``P`` by sigma^2."""

    sum_logf: float
    sum_v2f: float
    state: np.ndarray  # predicted state after the last observation
    state_cov: np.ndarray
    innovations: np.ndarray
    variances: np.ndarray
    nobs: int
    phi: np.ndarray
    R: np.ndarray

    @property
    def sigma2_hat(self) -> float:
        return self.sum_v2f / self.nobs

    def loglik(self, sigma2: float) -> float:
        n = self.nobs
        return -0.5 * (n * (LOG_2PI + math.log(sigma2)) + self.sum_logf + self.sum_v2f / sigma2)

    def concentrated_loglik(self) -> float:
        n = self.nobs
        s2 = self.sigma2_hat
        if not s2 > 0:
            return -math.inf
        return -0.5 * (n * (LOG_2PI + math.log(s2) + 1.0) + self.sum_logf)

    def forecast_state(self, h: int) -> np.ndarray:
        """Conditional means x~_{n+1..n+h}."""
        a = self.state.copy()
        out = np.empty(h)
        m = a.size
        for j in range(h):
            out[j] = a[0]
            nxt = self.phi * a[0]
            nxt[: m - 1] += a[1:]
            a = nxt
        return out


def run_filter(ar, ma, x, keep: bool = False) -> FilterOutput:
    x = np.ascontiguousarray(np.asarray(x, dtype=float))
    phi, R = state_space(ar, ma)
    P0 = stationary_cov(phi, R)
    slf, sv, a, P, v, f, bad = _filter(phi, R, P0, x, keep)
    if bad >= 0:
        raise NumericalError(f"Kalman filter produced non-finite values at time index {bad}")
    return FilterOutput(slf, sv, a, P, v, f, x.size, phi, R)


def kalman_loglik(ar, ma, sigma2: float, x) -> float:
    """Exact Gaussian log-likelihood of the zero-mean ARMA ``ar(B) x = ma(B) V``."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return run_filter(ar, ma, x).loglik(sigma2)
