"""Box-Jenkins identification tools.

Sample ACF, PACF through the Levinson-Durbin recursion, the Fourier
periodogram, and the KPSS / ADF / Ljung-Box tests used to choose the
differencing orders and to check whiteness of fitted innovations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, SingularityError
from .series import DifferenceSpec, TimeSeries, as_series, difference

__all__ = [
    "CorrelogramResult",
    "TestResult",
    "Spectrogram",
    "acf",
    "pacf",
    "periodogram",
    "kpss_statistic",
    "kpss_test",
    "adf_regression",
    "adf_test",
    "ljung_box",
    "seasonal_peak_ratio",
    "identify",
]

LEVELS = (0.10, 0.05, 0.01)


@dataclass(frozen=True)
class CorrelogramResult:
    lags: np.ndarray
    values: np.ndarray
    confidence_band: float
    kind: str = "acf"

    def __getitem__(self, k):
        return self.values[k]

    def significant_lags(self) -> np.ndarray:
        """Lags >= 1 outside the white-noise band."""
        mask = np.abs(self.values) > self.confidence_band
        mask[0] = False
        return self.lags[mask]


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    critical_values: dict
    level: float
    reject: bool
    lags_used: int
    null: str
    alternative: str = "greater"  # side of the rejection region
    pvalue: float | None = None
    nobs: int = 0

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "fail to reject"

    def __str__(self):
        return (
            f"{self.name}: stat={self.statistic:.4f} "
            f"cv({self.level:g})={self.critical_values[self.level]:.4f} "
            f"-> {self.decision} H0 ({self.null})"
        )


@dataclass(frozen=True)
class Spectrogram:
    k: np.ndarray
    frequencies: np.ndarray
    power: np.ndarray
    n: int
    dominant_periods: list = field(default_factory=list)

    @property
    def periods(self) -> np.ndarray:
        return self.n / self.k


def _autocov(x: np.ndarray, max_lag: int) -> np.ndarray:
    xc = x - x.mean()
    n = xc.size
    return np.array([xc[: n - k] @ xc[k:] for k in range(max_lag + 1)]) / n


def acf(x, max_lag: int) -> CorrelogramResult:
    """Sample autocorrelations, autocovariances with divisor T."""
    x = as_series(x).values
    n = x.size
    if not 1 <= max_lag < n:
        raise DataError(f"max_lag must be in [1, {n - 1}], got {max_lag}")
    g = _autocov(x, max_lag)
    if g[0] <= 0:
        raise DataError("zero-variance series has no autocorrelation function")
    return CorrelogramResult(
        np.arange(max_lag + 1), g / g[0], 1.96 / math.sqrt(n), "acf"
    )


def levinson_durbin(rho: np.ndarray, max_lag: int) -> np.ndarray:
    """phi_{t,t} for t = 1..max_lag from autocorrelations rho[0..max_lag]."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty(max_lag)
    phi = np.zeros(0)
    for t in range(1, max_lag + 1):
        if t == 1:
            ptt = rho[1]
        else:
            denom = 1.0 - phi @ rho[1:t]
            if abs(denom) < 1e-12:
                raise SingularityError(
                    f"Levinson-Durbin denominator vanishes at lag {t}: "
                    "the process is perfectly predictable"
                )
            ptt = (rho[t] - phi @ rho[t - 1 : 0 : -1]) / denom
        phi = np.append(phi - ptt * phi[::-1], ptt)
        out[t - 1] = ptt
    return out


def pacf(rho: CorrelogramResult, max_lag: int | None = None) -> CorrelogramResult:
    """Partial autocorrelations from an ACF via Levinson-Durbin."""
    if max_lag is None:
        max_lag = int(rho.lags[-1])
    if max_lag > rho.lags[-1]:
        raise DataError(f"ACF only reaches lag {rho.lags[-1]}, asked for {max_lag}")
    vals = np.concatenate([[1.0], levinson_durbin(rho.values, max_lag)])
    return CorrelogramResult(np.arange(max_lag + 1), vals, rho.confidence_band, "pacf")


def periodogram(x, max_period: float | None = None, n_peaks: int = 5) -> Spectrogram:
    """gamma_k = |sum_t x_t e^{-i f_k t}|^2 / (2 pi T) at f_k = 2 pi k / T.

    Frequencies whose period T/k exceeds ``max_period`` (default T/2) are
    left out of the dominant-period ranking, not out of the power array.
    """
    x = as_series(x).values
    n = x.size
    if n < 4:
        raise DataError("periodogram needs at least 4 observations")
    k = np.arange(1, n // 2 + 1)
    dft = np.fft.fft(x)[1 : n // 2 + 1]
    power = np.abs(dft) ** 2 / (2 * np.pi * n)
    if max_period is None:
        max_period = n / 2
    left = np.concatenate([[-np.inf], power[:-1]])
    right = np.concatenate([power[1:], [-np.inf]])
    peak = (power >= left) & (power >= right) & (n / k <= max_period) & (power > 0)
    order = np.flatnonzero(peak)[np.argsort(-power[peak], kind="stable")]
    dominant = [(n / float(k[i]), float(power[i])) for i in order[:n_peaks]]
    return Spectrogram(k, 2 * np.pi * k / n, power, n, dominant)


def seasonal_peak_ratio(spec: Spectrogram, period: float, half_width: int = 10) -> float:
    """Power at the Fourier bin of ``period`` over the median of nearby bins.

    Under a smooth spectrum the ratio is roughly Exp(1)/ln 2, so values above
    ~10 flag a genuine periodic component.
    """
    kk = int(round(spec.n / period))
    if kk < 1 or kk > spec.k[-1]:
        return 0.0
    i = kk - 1
    lo, hi = max(0, i - half_width), min(spec.power.size, i + half_width + 1)
    nb = np.concatenate([spec.power[lo:i], spec.power[i + 1 : hi]])
    med = np.median(nb) if nb.size else 0.0
    if med <= 0:
        return math.inf if spec.power[i] > 0 else 0.0
    return float(spec.power[i] / med)


# KPSS asymptotic critical values (Kwiatkowski et al. 1992, table 1)
_KPSS_CV = {
    "c": {0.10: 0.347, 0.05: 0.463, 0.025: 0.574, 0.01: 0.739},
    "ct": {0.10: 0.119, 0.05: 0.146, 0.025: 0.176, 0.01: 0.216},
}


def _long_run_variance(e: np.ndarray, bandwidth: int) -> float:
    n = e.size
    s2 = e @ e / n
    for j in range(1, bandwidth + 1):
        w = 1.0 - j / (bandwidth + 1.0)
        s2 += 2.0 * w * (e[j:] @ e[:-j]) / n
    return s2


def kpss_bandwidth(n: int) -> int:
    return int(4 * (n / 100.0) ** 0.25)


def kpss_statistic(x, bandwidth: int, regression: str = "c",
                   period: int | None = None) -> float:
    """With ``period``, the level is a periodic mean (one dummy per phase).

    Periodic regressors leave the limiting null distribution unchanged, so the
    usual critical values still apply.
    """
    x = as_series(x).values
    n = x.size
    if regression not in ("c", "ct"):
        raise ValueError(f"unknown KPSS regression {regression!r}")
    if period is None and regression == "c":
        e = x - x.mean()
    else:
        cols = [np.ones(n)] if period is None else [
            (np.arange(n) % period == j).astype(float) for j in range(period)
        ]
        if regression == "ct":
            cols.append(np.arange(n, dtype=float))
        X = np.column_stack(cols)
        e = x - X @ np.linalg.lstsq(X, x, rcond=None)[0]
    s = np.cumsum(e)
    lrv = _long_run_variance(e, bandwidth)
    if lrv <= 1e-14 * max(1.0, x @ x / n):
        raise DataError("degenerate series: long-run variance is zero")
    return float(s @ s / (n * n * lrv))


def kpss_test(x, bandwidth: int | None = None, regression: str = "c",
              level: float = 0.05, period: int | None = None) -> TestResult:
    """KPSS test of (level or trend) stationarity, Bartlett-weighted variance."""
    x = as_series(x).values
    if x.size < 10:
        raise DataError("KPSS test needs at least 10 observations")
    if period is not None and x.size < 2 * period:
        raise DataError(f"KPSS with period {period} needs at least {2 * period} observations")
    if bandwidth is None:
        bandwidth = kpss_bandwidth(x.size)
    stat = kpss_statistic(x, bandwidth, regression, period)
    cv = _KPSS_CV[regression]
    return TestResult(
        "KPSS", stat, dict(cv), level, stat > cv[level], bandwidth,
        "stationary", "greater", nobs=x.size,
    )


# Dickey-Fuller t critical values, Fuller (1976) as tabulated in Hamilton
# (1994) table B.6; rows are sample sizes, inf last.
_DF_SIZES = np.array([25, 50, 100, 250, 500, np.inf])
_DF_LEVELS = (0.01, 0.025, 0.05, 0.10)
_DF_TABLE = {
    "n": np.array([
        [-2.66, -2.26, -1.95, -1.60],
        [-2.62, -2.25, -1.95, -1.61],
        [-2.60, -2.24, -1.95, -1.61],
        [-2.58, -2.23, -1.95, -1.62],
        [-2.58, -2.23, -1.95, -1.62],
        [-2.58, -2.23, -1.95, -1.62],
    ]),
    "c": np.array([
        [-3.75, -3.33, -3.00, -2.63],
        [-3.58, -3.22, -2.93, -2.60],
        [-3.51, -3.17, -2.89, -2.58],
        [-3.46, -3.14, -2.88, -2.57],
        [-3.44, -3.13, -2.87, -2.57],
        [-3.43, -3.12, -2.86, -2.57],
    ]),
    "ct": np.array([
        [-4.38, -3.95, -3.60, -3.24],
        [-4.15, -3.80, -3.50, -3.18],
        [-4.04, -3.73, -3.45, -3.15],
        [-3.99, -3.69, -3.43, -3.13],
        [-3.98, -3.68, -3.42, -3.13],
        [-3.96, -3.66, -3.41, -3.12],
    ]),
}


def adf_critical_values(nobs: int, regression: str = "c") -> dict:
    """Table values linearly interpolated in 1/T."""
    inv = 1.0 / _DF_SIZES  # decreasing, 0 last
    table = _DF_TABLE[regression]
    x = min(1.0 / max(nobs, 1), inv[0])
    return {
        lvl: float(np.interp(x, inv[::-1], table[::-1, j]))
        for j, lvl in enumerate(_DF_LEVELS)
    }


@dataclass(frozen=True)
class ADFRegression:
    tstat: float
    phi: float
    stderr: float
    ssr: float
    nobs: int
    n_regressors: int

    @property
    def aic(self) -> float:
        return self.nobs * math.log(self.ssr / self.nobs) + 2 * self.n_regressors


def adf_regression(x, lags: int, regression: str = "c", nobs: int | None = None) -> ADFRegression:
    """OLS of dx_t on x_{t-1}, ``lags`` lagged differences and deterministics.

    ``nobs`` restricts the fit to the last ``nobs`` usable rows (common
    sample for lag selection).
    """
    x = as_series(x).values
    dx = np.diff(x)
    rows = np.arange(lags, dx.size)
    if nobs is not None:
        rows = rows[rows.size - nobs:]
    if rows.size == 0:
        raise DataError("series too short for the ADF regression")
    cols = [x[rows]]
    cols += [dx[rows - j] for j in range(1, lags + 1)]
    if regression in ("c", "ct"):
        cols.append(np.ones(rows.size))
    if regression == "ct":
        cols.append(rows.astype(float))
    if regression not in ("n", "c", "ct"):
        raise ValueError(f"unknown ADF regression {regression!r}")
    X = np.column_stack(cols)
    y = dx[rows]
    n, k = X.shape
    if n <= k:
        raise DataError("not enough observations for the ADF regression")
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < k:
        raise SingularityError("collinear regressors in the ADF regression")
    resid = y - X @ coef
    ssr = float(resid @ resid)
    s2 = ssr / (n - k)
    xtx_inv = np.linalg.inv(X.T @ X)
    se = math.sqrt(s2 * xtx_inv[0, 0])
    if se == 0:
        raise SingularityError("zero standard error in the ADF regression")
    return ADFRegression(coef[0] / se, float(coef[0]), se, ssr, n, k)


def adf_test(x, max_lag: int | None = None, regression: str = "c",
             level: float = 0.05, autolag: bool = True) -> TestResult:
    """Augmented Dickey-Fuller unit-root test, lag order chosen by AIC."""
    x = as_series(x).values
    n = x.size
    if max_lag is None:
        max_lag = min(int(12 * (n / 100.0) ** 0.25), max(n - 10, 0))
        max_lag = min(max_lag, max((n - 1) // 3 - 1, 0))
    if n < 10 + max_lag:
        raise DataError(f"ADF test with {max_lag} lags needs at least {10 + max_lag} observations")
    if autolag and max_lag > 0:
        common = n - 1 - max_lag
        best = min(range(max_lag + 1),
                   key=lambda p: adf_regression(x, p, regression, nobs=common).aic)
    else:
        best = max_lag
    reg = adf_regression(x, best, regression)
    cv = adf_critical_values(reg.nobs, regression)
    return TestResult(
        "ADF", reg.tstat, cv, level, reg.tstat < cv[level], best,
        "unit root", "less", nobs=reg.nobs,
    )


def ljung_box(residuals, h: int = 3, fitted_params: int = 0,
              level: float = 0.05) -> TestResult:
    """Portmanteau statistic Q = T(T+2) sum rho_k^2/(T-k), chi2(h - fitted_params)."""
    x = as_series(residuals).values
    n = x.size
    if h < 1:
        raise DataError("Ljung-Box needs h >= 1")
    if h <= fitted_params:
        raise DataError(
            f"Ljung-Box degrees of freedom h - fitted_params = {h - fitted_params} <= 0"
        )
    if n <= h:
        raise DataError("Ljung-Box needs more observations than lags")
    g = _autocov(x, h)
    if g[0] <= 0:
        raise DataError("zero-variance residuals")
    rho = g[1:] / g[0]
    q = float(n * (n + 2) * np.sum(rho**2 / (n - np.arange(1, h + 1))))
    dof = h - fitted_params
    cv = {lvl: float(stats.chi2.ppf(1 - lvl, dof)) for lvl in LEVELS}
    cv.setdefault(level, float(stats.chi2.ppf(1 - level, dof)))
    return TestResult(
        "Ljung-Box", q, cv, level, q > cv[level], h, "white noise", "greater",
        pvalue=float(stats.chi2.sf(q, dof)), nobs=n,
    )


@dataclass
class DifferencingVerdict:
    spec: DifferenceSpec
    kpss: TestResult
    adf: TestResult
    spectrogram: Spectrogram
    seasonal_ratios: dict

    @property
    def stationary(self) -> bool:
        """KPSS and ADF agree on stationarity."""
        return (not self.kpss.reject) and self.adf.reject

    @property
    def nonstationary(self) -> bool:
        return self.kpss.reject and not self.adf.reject

    @property
    def verdict(self) -> str:
        if self.stationary:
            return "stationary"
        if self.nonstationary:
            return "non-stationary"
        return "inconclusive"

    def periodic(self, threshold: float = 10.0) -> bool:
        return any(r > threshold for r in self.seasonal_ratios.values())

    @property
    def name(self) -> str:
        parts = []
        if self.spec.d:
            parts.append("diff" if self.spec.d == 1 else f"diff^{self.spec.d}")
        if self.spec.D:
            parts.append(f"sdiff{self.spec.s}" + ("" if self.spec.D == 1 else f"^{self.spec.D}"))
        return "*".join(parts) or "raw"


@dataclass
class IdentificationReport:
    dominant_periods: list
    verdicts: list
    acfs: dict
    pacfs: dict
    periodic_threshold: float = 10.0

    def by_name(self, name: str) -> DifferencingVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def seasonal_period(self) -> int | None:
        """Smallest candidate s with a raw spectral peak that lag-s differencing removes.

        With stochastic seasonality any harmonic s/k may carry the single
        largest periodogram peak; comparing differencings singles out the
        fundamental.
        """
        raw = self.verdicts[0]
        for v in self.verdicts:
            if v.spec.d == 0 and v.spec.D == 1:
                s = v.spec.s
                if raw.seasonal_ratios[s] > self.periodic_threshold and not v.periodic(
                        self.periodic_threshold):
                    return s
        return None


def identify(x, seasons=(12, 24), max_lag: int = 72, level: float = 0.05,
             max_period: float | None = None, adf_regression_kind: str = "c",
             periodic_threshold: float = 10.0, adf_max_lag: int | None = None,
             seasonal_dummies: bool = True) -> IdentificationReport:
    """Run the identification battery on regression residuals.

    For the raw series and each candidate differencing (first, seasonal,
    first-and-seasonal for every period in ``seasons``) this collects the
    periodogram, KPSS and ADF verdicts, and the ACF/PACF.

    The ADF lag search spans at least three cycles of the longest candidate
    season, otherwise a seasonal moving-average factor leaves enough
    correlation in the test regression to distort its size. KPSS uses a
    periodic level (``seasonal_dummies``) so that a fixed daily profile does
    not swamp the long-run variance.
    """
    x = as_series(x)
    seasons = tuple(sorted(set(seasons)))
    raw_spec = periodogram(x, max_period=max_period)
    specs = [DifferenceSpec(0, 0, 1), DifferenceSpec(1, 0, 1)]
    for s in seasons:
        specs += [DifferenceSpec(0, 1, s), DifferenceSpec(1, 1, s)]
    dummy = math.lcm(*seasons) if seasonal_dummies and seasons else None
    verdicts, acfs, pacfs = [], {}, {}
    for sp in specs:
        y = difference(x, sp)
        n = len(y)
        spec = raw_spec if sp.lost == 0 else periodogram(y, max_period=max_period)
        ratios = {s: seasonal_peak_ratio(spec, s) for s in seasons}
        lag_cap = max((n - 1) // 3 - 1, 0)
        if adf_max_lag is None:
            ml = max(int(12 * (n / 100.0) ** 0.25), 3 * max(seasons, default=0))
        else:
            ml = adf_max_lag
        period = dummy if dummy is not None and n >= 10 * dummy else None
        v = DifferencingVerdict(
            sp,
            kpss_test(y, level=level, period=period),
            adf_test(y, max_lag=min(ml, lag_cap), level=level, regression=adf_regression_kind),
            spec,
            ratios,
        )
        verdicts.append(v)
        lag = min(max_lag, len(y) - 1)
        a = acf(y, lag)
        acfs[v.name] = a
        pacfs[v.name] = pacf(a)
    return IdentificationReport(raw_spec.dominant_periods, verdicts, acfs, pacfs,
                                periodic_threshold)
