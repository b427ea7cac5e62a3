"""Time-series container, logarithmic Box-Cox pair and backshift differencing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DataError, NumericalError

DEFAULT_MU = 5.0


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled observations.

    ``start`` and ``step`` may be plain numbers (an integer time index is the
    default) or a ``datetime``/``timedelta`` pair; only ``start + i * step``
    and ``(t - start) / step`` are ever needed.
    """

    values: np.ndarray
    start: Any = 0
    step: Any = 1
    label: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise DataError(
                f"series {self.label!r} has non-finite value at index {int(bad[0])}"
            )
        if not _positive(self.step):
            raise DataError(f"step must be strictly positive, got {self.step!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def time_at(self, i: int):
        return self.start + i * self.step

    @property
    def end(self):
        """Time of the last observation."""
        return self.time_at(len(self) - 1)

    def index_of(self, t) -> int:
        """Integer position of time ``t`` (may be negative or past the end)."""
        k = (t - self.start) / self.step
        ik = int(round(k))
        if abs(k - ik) > 1e-9:
            raise DataError(f"time {t!r} is not on the sampling grid of {self.label!r}")
        return ik

    def times(self) -> list:
        return [self.time_at(i) for i in range(len(self))]

    def slice(self, i: int, j: int | None = None) -> "TimeSeries":
        j = len(self) if j is None else j
        return TimeSeries(self.values[i:j], self.time_at(i), self.step, self.label)

    def with_values(self, values, offset: int = 0, label: str | None = None) -> "TimeSeries":
        """New series on the same grid, first value at position ``offset``."""
        return TimeSeries(
            values, self.time_at(offset), self.step, self.label if label is None else label
        )


def _positive(step) -> bool:
    try:
        return step > 0
    except TypeError:
        return step.total_seconds() > 0


def as_series(x, label: str = "") -> TimeSeries:
    if isinstance(x, TimeSeries):
        return x
    return TimeSeries(np.asarray(x, dtype=float), label=label)


@dataclass(frozen=True)
class DifferenceSpec:
    """Orders of ``(1 - B)^d (1 - B^s)^D``."""

    d: int = 0
    D: int = 0
    s: int = 1

    def __post_init__(self):
        if self.d < 0 or self.D < 0:
            raise ValueError("differencing orders must be nonnegative")
        if self.s < 1:
            raise ValueError("seasonal period must be >= 1")
        if self.D > 0 and self.s < 2:
            raise ValueError("seasonal differencing needs a period s >= 2")

    @property
    def lost(self) -> int:
        """Number of leading observations consumed by the differencing."""
        return self.d + self.D * self.s

    def lags(self) -> list[int]:
        # order of application; the operators commute
        return [1] * self.d + [self.s] * self.D


def log_transform(c, mu: float = DEFAULT_MU) -> TimeSeries:
    """``Y_t = ln(C_t + e^mu)``; maps zero consumption onto ``mu``."""
    c = as_series(c, "consumption")
    if mu <= 0:
        raise ValueError("mu must be positive")
    neg = np.flatnonzero(c.values < 0)
    if neg.size:
        i = int(neg[0])
        raise DataError(f"negative consumption {c.values[i]!r} at index {i}")
    return c.with_values(np.log(c.values + math.exp(mu)))


def inverse_transform(y, mu: float = DEFAULT_MU) -> TimeSeries:
    """``C_t = e^{Y_t} - e^mu``. Negative outputs are kept (see ``negative_count``)."""
    y = as_series(y, "log-consumption")
    if mu <= 0:
        raise ValueError("mu must be positive")
    with np.errstate(over="ignore"):
        c = np.exp(y.values) - math.exp(mu)
    bad = np.flatnonzero(~np.isfinite(c))
    if bad.size:
        raise NumericalError(f"exp overflow in inverse transform at index {int(bad[0])}")
    return y.with_values(c)


def inverse_values(y: np.ndarray, mu: float = DEFAULT_MU) -> np.ndarray:
    with np.errstate(over="ignore"):
        c = np.exp(np.asarray(y, dtype=float)) - math.exp(mu)
    if not np.all(np.isfinite(c)):
        raise NumericalError("exp overflow in inverse transform")
    return c


def negative_count(c) -> int:
    return int(np.sum(np.asarray(c, dtype=float) < 0))


def difference_values(x: np.ndarray, spec: DifferenceSpec) -> np.ndarray:
    out = np.asarray(x, dtype=float)
    for lag in spec.lags():
        out = out[lag:] - out[:-lag]
    return out


def difference(x, spec: DifferenceSpec) -> TimeSeries:
    """Apply ``(1 - B)^d (1 - B^s)^D`` by repeated exact subtraction."""
    x = as_series(x)
    need = spec.lost + 1
    if len(x) < need:
        raise DataError(
            f"series of length {len(x)} too short for differencing {spec}; "
            f"need at least {need}"
        )
    return x.with_values(difference_values(x.values, spec), offset=spec.lost)


def integrate(dx, initial: Sequence[float], spec: DifferenceSpec) -> TimeSeries:
    """Undo ``difference`` given the ``d + D*s`` pre-sample values.

    The result has ``len(initial) + len(dx)`` values, starting with ``initial``.
    """
    dx = as_series(dx)
    initial = np.asarray(initial, dtype=float).reshape(-1)
    if initial.size != spec.lost:
        raise DataError(
            f"integration needs exactly {spec.lost} initial values, got {initial.size}"
        )
    lags = spec.lags()
    # heads[j] = first lags[j] values of the input to differencing stage j
    heads = []
    stage = initial
    for lag in lags:
        heads.append(stage[:lag].copy())
        stage = stage[lag:] - stage[:-lag]
    out = dx.values.copy()
    for lag, head in zip(reversed(lags), reversed(heads)):
        full = np.empty(lag + out.size)
        full[:lag] = head
        for t in range(out.size):
            full[lag + t] = out[t] + full[t]
        out = full
    return TimeSeries(out, dx.time_at(-spec.lost), dx.step, dx.label)


def interpolate_gaps(values: np.ndarray, max_gap: int) -> tuple[np.ndarray, int]:
    """Linearly fill interior NaN runs of length <= ``max_gap``.

    Returns the filled array and the number of points filled. Longer runs and
    NaNs touching either end raise ``DataError``.
    """
    v = np.array(values, dtype=float)
    missing = np.isnan(v)
    if not missing.any():
        return v, 0
    idx = np.flatnonzero(missing)
    if idx[0] == 0 or idx[-1] == v.size - 1:
        raise DataError("missing values at the series boundary cannot be interpolated")
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        if run.size > max_gap:
            raise DataError(
                f"gap of {run.size} missing values starting at index {int(run[0])} "
                f"exceeds the limit {max_gap}"
            )
    good = np.flatnonzero(~missing)
    v[missing] = np.interp(idx, good, v[good])
    return v, int(idx.size)
