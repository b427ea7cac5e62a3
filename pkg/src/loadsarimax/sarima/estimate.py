"""SARIMA estimation on regression residuals.

Conditional sum of squares gives starting values; the exact Kalman
likelihood (with sigma^2 concentrated out) is then maximized by L-BFGS with
central-difference gradients. Every AR and MA factor is optimized through
its partial autocorrelations, so the search never leaves the
causal/invertible region.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, signal

from ..diagnostics import TestResult, ljung_box
from ..errors import DataError, NumericalError
from ..regress import RegressionFit, ols_fit
from ..series import DifferenceSpec, TimeSeries, as_series, difference
from .kalman import run_filter
from .polynomials import LagPolynomial, arma_factors, check_causal, expand

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
# |u| cap for the partial-autocorrelation transform: tanh(7) = 0.9999983
MAX_U = 7.0
PENALTY = 1e12


@dataclass(frozen=True)
class SarimaxOrder:
    p: int = 0
    d: int = 0
    q: int = 0
    r: int = 1
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 24

    def __post_init__(self):
        for name in ("p", "d", "q", "r", "P", "D", "Q"):
            if getattr(self, name) < 0:
                raise ValueError(f"order component {name} must be nonnegative")
        if self.s < 1:
            raise ValueError("seasonal period must be positive")
        if (self.P or self.Q or self.D) and self.s < 2:
            raise ValueError("seasonal terms need s >= 2")

    @classmethod
    def parse(cls, text: str) -> "SarimaxOrder":
        """From ``p,d,q,r,P,D,Q,s`` (the last field may be omitted; s = 24)."""
        parts = [int(v) for v in text.replace(" ", "").split(",") if v != ""]
        if len(parts) not in (7, 8):
            raise ValueError(f"order needs 7 or 8 integers p,d,q,r,P,D,Q[,s], got {text!r}")
        return cls(*parts)

    @property
    def diff_spec(self) -> DifferenceSpec:
        return DifferenceSpec(self.d, self.D, self.s if self.s >= 2 else 1)

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def n_params(self) -> int:
        """k in the information criteria: regression + ARMA + sigma^2."""
        return self.r + 1 + self.n_arma + 1

    def with_r(self, r: int) -> "SarimaxOrder":
        return replace(self, r=r)

    def astuple(self) -> tuple:
        return (self.p, self.d, self.q, self.r, self.P, self.D, self.Q, self.s)

    def key(self) -> str:
        return ",".join(str(v) for v in self.astuple())

    def __str__(self):
        return (f"SARIMAX({self.p},{self.d},{self.q},{self.r})"
                f"x({self.P},{self.D},{self.Q})_{self.s}")


@dataclass(frozen=True)
class SarimaxModel:
    order: SarimaxOrder
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma2: float
    exog_coef: np.ndarray | None = None
    stderr: dict | None = None
    loglik: float = float("nan")
    converged: bool = True
    iterations: int = 0
    n_obs: int = 0
    mu: float | None = None
    window: int | None = None

    def __post_init__(self):
        for name in ("a", "b", "alpha", "beta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        o = self.order
        sizes = (self.a.size, self.b.size, self.alpha.size, self.beta.size)
        if sizes != (o.p, o.q, o.P, o.Q):
            raise ValueError(f"coefficient sizes {sizes} do not match {o}")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.exog_coef is not None:
            object.__setattr__(self, "exog_coef", np.asarray(self.exog_coef, dtype=float))

    def arma_polynomials(self) -> tuple[LagPolynomial, LagPolynomial]:
        return arma_factors(self.order.s, self.a, self.b, self.alpha, self.beta)

    def polynomials(self) -> tuple[LagPolynomial, LagPolynomial]:
        return expand(self.order, self.a, self.b, self.alpha, self.beta)

    def params(self) -> dict:
        out = {}
        for name, vals in (("a", self.a), ("b", self.b), ("alpha", self.alpha), ("beta", self.beta)):
            for i, v in enumerate(vals, start=1):
                out[f"{name}{i}"] = float(v)
        return out


@dataclass(frozen=True)
class FitReport:
    aic: float
    sbc: float
    loglik: float
    var: float
    wn: bool
    k: int
    t: int
    whiteness: TestResult | None = None
    converged: bool = True

    def row(self) -> dict:
        return {"AIC": self.aic, "SBC": self.sbc, "LL": self.loglik,
                "VAR": self.var, "WN": self.wn}


def information_criteria(loglik: float, k: int, t: int) -> tuple[float, float]:
    """(AIC, SBC) = (-2 LL + 2k, -2 LL + k ln T)."""
    if t < 1 or k < 0:
        raise ValueError("need t >= 1 and k >= 0")
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(t)


def coefficient_tstats(model: SarimaxModel) -> dict:
    """estimate / stderr for the time-series coefficients only."""
    if not model.stderr:
        raise NumericalError("standard errors are unavailable for this model")
    out = {}
    for name, est in model.params().items():
        se = model.stderr.get(name)
        if se is None or not se > 0:
            raise NumericalError(f"t-statistic of {name} undefined: stderr = {se}")
        out[name] = est / se
    return out


# -- partial-autocorrelation parameterization ---------------------------------

def pacf_to_coeffs(r: np.ndarray) -> np.ndarray:
    """Partial autocorrelations in (-1, 1) -> c with 1 - sum c_k z^k causal."""
    c = np.zeros(0)
    for rk in r:
        c = np.append(c - rk * c[::-1], rk)
    return c


def coeffs_to_pacf(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float).copy()
    r = np.zeros(c.size)
    for k in range(c.size, 0, -1):
        rk = float(np.clip(c[k - 1], -0.9999, 0.9999))
        r[k - 1] = rk
        prev = c[: k - 1]
        c = (prev + rk * prev[::-1]) / (1.0 - rk * rk)
    return r


def _split(vec, sizes):
    out, i = [], 0
    for n in sizes:
        out.append(vec[i:i + n])
        i += n
    return out


def to_natural(u: np.ndarray, sizes) -> list[np.ndarray]:
    u = np.clip(u, -MAX_U, MAX_U)
    return [pacf_to_coeffs(np.tanh(block)) for block in _split(u, sizes)]


def to_unconstrained(blocks) -> np.ndarray:
    parts = [np.arctanh(coeffs_to_pacf(b)) for b in blocks]
    return np.concatenate(parts) if parts else np.zeros(0)


# -- objectives ---------------------------------------------------------------

def _css(ar: np.ndarray, ma: np.ndarray, x: np.ndarray) -> float:
    e = signal.lfilter(ar, ma, x)
    return float(e @ e)


def css_objective(ar, ma, x) -> float:
    """Sum of squared one-step innovations, pre-sample values set to zero."""
    ar = ar if isinstance(ar, LagPolynomial) else LagPolynomial(np.asarray(ar, dtype=float))
    ma = ma if isinstance(ma, LagPolynomial) else LagPolynomial(np.asarray(ma, dtype=float))
    if not check_causal(ar):
        raise DataError("CSS objective requires a causal AR polynomial")
    x = as_series(x).values
    return _css(ar.coeffs.astype(float), ma.coeffs.astype(float), x)


def _num_grad(f, x: np.ndarray) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = EPS ** (1 / 3) * max(abs(x[i]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def _num_hessian(f, x: np.ndarray) -> np.ndarray:
    k = x.size
    h = EPS ** (1 / 4) * np.maximum(np.abs(x), 1.0)
    H = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (f(x + 2 * ei) - 2 * f0 + f(x - 2 * ei)) / (4 * h[i] ** 2)
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


class _Problem:
    def __init__(self, x: np.ndarray, order: SarimaxOrder):
        self.x = x
        self.order = order
        self.sizes = (order.p, order.q, order.P, order.Q)

    def polys(self, blocks):
        a, b, alpha, beta = blocks
        return arma_factors(self.order.s, a, b, alpha, beta)

    def css(self, u):
        e = self.css_residuals(u)
        return float(e @ e)

    def css_residuals(self, u):
        ar, ma = self.polys(to_natural(u, self.sizes))
        return signal.lfilter(ar.coeffs, ma.coeffs, self.x)

    def negll(self, u):
        return -self.loglik_blocks(to_natural(u, self.sizes))

    def loglik_blocks(self, blocks):
        ar, ma = self.polys(blocks)
        try:
            ll = run_filter(ar, ma, self.x).concentrated_loglik()
        except (NumericalError, np.linalg.LinAlgError, ValueError):
            return -PENALTY
        return ll if np.isfinite(ll) else -PENALTY

    def loglik_natural(self, theta):
        return self.loglik_blocks(_split(theta, self.sizes))


def _minimize(f, u0, max_iter, tol):
    res = optimize.minimize(
        f, u0, jac=lambda u: _num_grad(f, u), method="L-BFGS-B",
        bounds=[(-MAX_U, MAX_U)] * u0.size,
        options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-6},
    )
    return res


def fit(residuals, order: SarimaxOrder, *, max_iter: int = 500, tol: float = 1e-8,
        whiteness_lag: int = 3, whiteness_level: float = 0.05,
        start: SarimaxModel | None = None) -> tuple[SarimaxModel, FitReport]:
    """Fit the SARIMA part of ``order`` to regression residuals."""
    residuals = as_series(residuals, "residuals")
    spec = order.diff_spec
    need = spec.lost + 10 * (order.n_arma + 1)
    if len(residuals) <= need:
        raise DataError(
            f"{len(residuals)} residuals are too few for {order}; need more than {need}"
        )
    x = np.ascontiguousarray(difference(residuals, spec).values)
    prob = _Problem(x, order)
    converged, iterations = True, 0
    if order.n_arma == 0:
        theta = np.zeros(0)
    else:
        if start is not None:
            u0 = to_unconstrained([start.a, start.b, start.alpha, start.beta])
        else:
            # trust-region steps keep the start away from the saturated edges
            # of the tanh map, where gradient methods stall
            u0 = optimize.least_squares(
                prob.css_residuals, np.zeros(order.n_arma), bounds=(-MAX_U, MAX_U),
                method="trf", xtol=1e-8, ftol=1e-10, max_nfev=max_iter,
            ).x
        res = _minimize(prob.negll, u0, max_iter, tol)
        converged, iterations = bool(res.success), int(res.nit)
        if not converged:
            log.warning("%s: optimizer stopped without convergence (%s)", order, res.message)
        theta = np.concatenate(to_natural(res.x, prob.sizes))
    blocks = _split(theta, prob.sizes)
    ar, ma = prob.polys(blocks)
    if not check_causal(ar):
        raise NumericalError(f"{order}: estimated AR polynomial is not causal")
    flt = run_filter(ar, ma, x, keep=True)
    sigma2 = flt.sigma2_hat
    if not sigma2 > 0:
        raise NumericalError("estimated innovation variance is not positive")
    ll = flt.concentrated_loglik()
    stderr = _stderr(prob, theta) if order.n_arma else {}
    model = SarimaxModel(order, *blocks, sigma2=sigma2, stderr=stderr, loglik=ll,
                         converged=converged, iterations=iterations, n_obs=len(residuals))
    std_innov = flt.innovations / np.sqrt(flt.variances)
    wn_test = ljung_box(std_innov, h=whiteness_lag, level=whiteness_level)
    report = make_report(model, wn_test)
    return model, report


def make_report(model: SarimaxModel, wn_test: TestResult | None) -> FitReport:
    k = model.order.n_params
    aic, sbc = information_criteria(model.loglik, k, model.n_obs)
    wn = bool(wn_test is not None and not wn_test.reject)
    return FitReport(aic, sbc, model.loglik, model.sigma2, wn, k, model.n_obs,
                     wn_test, model.converged)


def _stderr(prob: _Problem, theta: np.ndarray) -> dict | None:
    names = [f"{n}{i}" for n, size in zip(("a", "b", "alpha", "beta"), prob.sizes)
             for i in range(1, size + 1)]
    H = _num_hessian(prob.loglik_natural, theta)
    try:
        cov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        return None
    var = np.diag(cov)
    if not np.all(np.isfinite(var)) or np.any(var <= 0):
        return None
    try:
        np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        return None
    return dict(zip(names, np.sqrt(var).tolist()))


def fit_sarimax(y, u, order: SarimaxOrder, **kwargs) -> tuple[SarimaxModel, FitReport, RegressionFit]:
    """OLS on lagged temperature, then SARIMA on the residuals."""
    reg = ols_fit(y, u, order.r)
    model, report = fit(reg.residuals, order, **kwargs)
    return replace(model, exog_coef=reg.coefficients), report, reg


# -- flat key = value serialization -------------------------------------------

_FORMAT = "loadsarimax-model 1"


def _fmt_list(v) -> str:
    return ",".join(repr(float(x)) for x in v)


def model_to_text(model: SarimaxModel) -> str:
    lines = [f"# {_FORMAT}", f"order = {model.order.key()}"]
    for name in ("a", "b", "alpha", "beta"):
        lines.append(f"{name} = {_fmt_list(getattr(model, name))}")
    lines.append(f"sigma2 = {model.sigma2!r}")
    lines.append("exog = " + ("" if model.exog_coef is None else _fmt_list(model.exog_coef)))
    lines.append(f"loglik = {float(model.loglik)!r}")
    lines.append(f"converged = {str(model.converged).lower()}")
    lines.append(f"iterations = {model.iterations}")
    lines.append(f"n_obs = {model.n_obs}")
    lines.append("mu = " + ("" if model.mu is None else repr(float(model.mu))))
    lines.append("window = " + ("" if model.window is None else str(model.window)))
    for name, se in (model.stderr or {}).items():
        lines.append(f"stderr.{name} = {float(se)!r}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"line {n}: expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def model_from_text(text: str) -> SarimaxModel:
    kv = parse_kv(text)

    def floats(key):
        v = kv.get(key, "")
        return np.array([float(x) for x in v.split(",") if x.strip()], dtype=float)

    try:
        stderr = {k.split(".", 1)[1]: float(v) for k, v in kv.items() if k.startswith("stderr.")}
        return SarimaxModel(
            SarimaxOrder.parse(kv["order"]), floats("a"), floats("b"), floats("alpha"),
            floats("beta"), float(kv["sigma2"]),
            exog_coef=floats("exog") if kv.get("exog") else None,
            stderr=stderr or None,
            loglik=float(kv.get("loglik", "nan")),
            converged=kv.get("converged", "true") == "true",
            iterations=int(kv.get("iterations", 0)),
            n_obs=int(kv.get("n_obs", 0)),
            mu=float(kv["mu"]) if kv.get("mu") else None,
            window=int(kv["window"]) if kv.get("window") else None,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from exc
