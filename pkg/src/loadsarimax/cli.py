"""Command-line workflow: ingest, diagnose, fit, select, forecast, evaluate.

Every subcommand reads a consumption file and a temperature file (two
columns: ISO-8601 timestamp, value), writes delimited tables into ``--out``
and appends to ``run.log`` there. Exit codes: 0 ok, 1 usage, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import diagnostics
from .errors import DataError, NumericalError
from .forecast import grid_search, in_sample, predict
from .regress import ols_fit
from .sarima import (
    SarimaxOrder,
    coefficient_tstats,
    fit_sarimax,
    model_to_text,
)
from .series import TimeSeries, interpolate_gaps, inverse_values, log_transform

log = logging.getLogger("loadsarimax")

DEFAULT_ORDERS = (
    "1,0,0,1,0,1,1",
    "0,0,1,1,0,1,1",
    "1,0,0,1,1,1,0",
    "0,0,0,1,0,1,1",
    "1,0,0,1,0,1,0",
)


class UsageError(Exception):
    pass


@dataclass
class Config:
    mu: float = 5.0
    season: int = 24
    r: int = 1
    whiteness_lag: int = 3
    whiteness_level: float = 0.05
    orders: tuple = DEFAULT_ORDERS
    r_values: tuple | None = None  # None: keep each order's own r
    m_values: tuple = (730,)
    window: int | None = None
    horizon: int = 24
    days: int = 14
    levels: tuple = (0.90, 0.95)
    max_gap: int = 3  # consumption steps
    temp_max_gap: int = 2  # native temperature steps
    seasons: tuple = (12, 24)
    max_lag: int = 72
    jobs: int = 1
    seed: int | None = None
    out: str = "out"

    def parsed_orders(self) -> list[SarimaxOrder]:
        return [parse_order(o, self.season) for o in self.orders]

    @classmethod
    def from_text(cls, text: str) -> "Config":
        cfg = cls()
        types = {f.name: f for f in fields(cls)}
        updates = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in types:
                raise UsageError(f"config line {n}: unknown or malformed entry {line!r}")
            updates[key] = _coerce(key, value, getattr(cfg, key))
        return replace(cfg, **updates)


def _coerce(key, value, default):
    try:
        if key == "orders":
            return tuple(v.strip() for v in value.split(";") if v.strip())
        if key == "levels":
            return parse_levels(value)
        if key == "r_values" and value.lower() in ("", "none"):
            return None
        if key in ("r_values", "m_values", "seasons"):
            return tuple(int(v) for v in value.split(",") if v.strip())
        if key in ("window", "seed"):
            return None if value.lower() in ("", "none") else int(value)
        if key == "out":
            return value
        return type(default)(value)
    except ValueError as exc:
        raise UsageError(f"config key {key!r}: {exc}") from None


def parse_order(text: str, season: int) -> SarimaxOrder:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) == 7:
        parts.append(str(season))
    try:
        return SarimaxOrder.parse(",".join(parts))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_levels(text: str) -> tuple:
    out = []
    for v in text.split(","):
        if not v.strip():
            continue
        x = float(v)
        x = x / 100.0 if x > 1 else x
        if not 0 < x < 1:
            raise ValueError(f"confidence level {v!r} out of range")
        out.append(x)
    return tuple(out)


# -- ingestion ----------------------------------------------------------------

def _parse_time(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _sniff_delimiter(lines: list[str]) -> str:
    sample = [ln for ln in lines if ln.strip()][:20]
    best, best_count = None, 0
    for d in (",", ";", "\t"):
        counts = {ln.count(d) for ln in sample}
        if len(counts) == 1 and (c := counts.pop()) > best_count:
            best, best_count = d, c
    if best is None:
        raise DataError("cannot detect a delimiter (expected comma, semicolon or tab)")
    return best


def read_two_column(path) -> tuple[list, np.ndarray]:
    """Timestamps and values; empty or NA values become NaN."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    delim = _sniff_delimiter(lines)
    times, values = [], []
    first = True
    for n, row in enumerate(csv.reader(lines, delimiter=delim), start=1):
        if not row or not any(f.strip() for f in row):
            continue
        if len(row) < 2:
            raise DataError(f"{path.name} line {n}: expected two columns")
        try:
            t = _parse_time(row[0])
        except ValueError:
            if first:  # header
                first = False
                continue
            raise DataError(f"{path.name} line {n}: unparseable timestamp {row[0]!r}") from None
        first = False
        v = row[1].strip()
        if v.lower() in ("", "na", "nan", "null"):
            x = math.nan
        else:
            try:
                x = float(v)
            except ValueError:
                raise DataError(f"{path.name} line {n}: unparseable value {v!r}") from None
            if not math.isfinite(x):
                raise DataError(f"{path.name} line {n}: non-finite value {v!r}")
        if times:
            try:
                ok = t > times[-1]
            except TypeError:
                raise DataError(f"{path.name} line {n}: mixed time-zone awareness") from None
            if not ok:
                raise DataError(f"{path.name} line {n}: timestamps must be strictly increasing")
        times.append(t)
        values.append(x)
    if len(times) < 2:
        raise DataError(f"{path.name}: need at least two observations")
    return times, np.array(values)


def regularize(times: list, values: np.ndarray, name: str) -> tuple[datetime, timedelta, np.ndarray]:
    """Place observations on a uniform grid (modal spacing); absent rows become NaN."""
    diffs = [b - a for a, b in zip(times, times[1:])]
    step = Counter(diffs).most_common(1)[0][0]
    offsets = []
    for i, t in enumerate(times):
        k, rem = divmod(t - times[0], step)
        if rem:
            raise DataError(f"{name}: timestamp {t.isoformat()} is off the {step} grid")
        offsets.append(k)
    grid = np.full(offsets[-1] + 1, np.nan)
    grid[offsets] = values
    return times[0], step, grid


@dataclass
class IngestStats:
    consumption_rows: int = 0
    consumption_filled: int = 0
    consumption_trimmed_lead: int = 0
    consumption_trimmed_tail: int = 0
    temperature_rows: int = 0
    temperature_filled: int = 0
    temperature_upsampled: int = 0
    messages: list = field(default_factory=list)


def _trim_nan_edges(v: np.ndarray) -> tuple[int, int]:
    good = np.flatnonzero(~np.isnan(v))
    if good.size == 0:
        raise DataError("series has no values")
    return int(good[0]), int(v.size - 1 - good[-1])


def ingest(consumption_path, temperature_path, config: Config) -> tuple[TimeSeries, TimeSeries, IngestStats]:
    """Load both files onto the consumption grid.

    Consumption rows outside the temperature coverage are trimmed (logged);
    temperatures beyond the consumption range are kept, since they serve as
    pre-sample lags and as the known future inputs of a forecast.
    """
    st = IngestStats()
    ct, cv = read_two_column(consumption_path)
    ut, uv = read_two_column(temperature_path)
    st.consumption_rows, st.temperature_rows = len(ct), len(ut)

    c0, cstep, cgrid = regularize(ct, cv, "consumption")
    lead, tail = _trim_nan_edges(cgrid)
    if lead or tail:
        st.messages.append(f"consumption: dropped {lead} leading and {tail} trailing empty values")
    c0 = c0 + lead * cstep
    cgrid = cgrid[lead:cgrid.size - tail]
    cgrid, st.consumption_filled = interpolate_gaps(cgrid, config.max_gap)
    if st.consumption_filled:
        st.messages.append(f"consumption: filled {st.consumption_filled} missing values linearly")

    u0, ustep, ugrid = regularize(ut, uv, "temperature")
    lead, tail = _trim_nan_edges(ugrid)
    u0 = u0 + lead * ustep
    ugrid = ugrid[lead:ugrid.size - tail]
    if ustep % cstep:
        raise DataError(f"temperature step {ustep} is not a multiple of consumption step {cstep}")
    if (u0 - c0) % cstep:
        raise DataError("temperature and consumption timestamps are on different calendars")
    ugrid, st.temperature_filled = interpolate_gaps(ugrid, config.temp_max_gap)
    if st.temperature_filled:
        st.messages.append(f"temperature: filled {st.temperature_filled} missing readings linearly")
    ratio = ustep // cstep
    if ratio > 1:
        fine = np.arange((ugrid.size - 1) * ratio + 1)
        uval = np.interp(fine, np.arange(ugrid.size) * ratio, ugrid)
        st.temperature_upsampled = fine.size - ugrid.size
        log.info("temperature: interpolated %d values from step %s to %s",
                 st.temperature_upsampled, ustep, cstep)
    else:
        uval = ugrid
    U = TimeSeries(uval, u0, cstep, "temperature")
    C = TimeSeries(cgrid, c0, cstep, "consumption")

    first = max(0, U.index_of(C.start) * -1)  # consumption rows before U starts
    last = min(len(C), U.index_of(U.end) - U.index_of(C.start) + 1)
    if last <= first:
        raise DataError("consumption and temperature do not overlap in time")
    st.consumption_trimmed_lead, st.consumption_trimmed_tail = first, len(C) - last
    if first or len(C) - last:
        st.messages.append(
            f"consumption: trimmed {first} leading and {len(C) - last} trailing rows "
            "without temperature"
        )
    C = C.slice(first, last)
    return C, U, st


# -- output -------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, datetime):
        return x.isoformat()
    return str(x)


def write_table(path: Path, header: list, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    log.info("wrote %s", path.name)
    return path


def read_table(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _order_label(o: SarimaxOrder) -> str:
    return f"({o.p},{o.d},{o.q},{o.r})x({o.P},{o.D},{o.Q})_{o.s}"


# -- subcommands --------------------------------------------------------------

def _load(args, cfg):
    C, U, st = ingest(args.consumption, args.temperature, cfg)
    log.info("ingest: %d consumption rows, %d temperature rows", st.consumption_rows,
             st.temperature_rows)
    for msg in st.messages:
        log.warning(msg)
    log.info("ingest: %d aligned observations from %s", len(C), fmt(C.start))
    return C, U


def _window(C: TimeSeries, cfg: Config) -> TimeSeries:
    if cfg.window is None or cfg.window >= len(C):
        return C
    log.info("using the last %d of %d observations", cfg.window, len(C))
    return C.slice(len(C) - cfg.window)


def cmd_ingest(args, cfg, out):
    C, U = _load(args, cfg)
    write_table(out / "consumption.csv", ["time", "consumption"], zip(C.times(), C.values))
    write_table(out / "temperature.csv", ["time", "temperature"], zip(U.times(), U.values))
    print(f"{len(C)} consumption and {len(U)} temperature values at step {C.step}")


def cmd_diagnose(args, cfg, out):
    C, U = _load(args, cfg)
    y = log_transform(C, cfg.mu)
    reg = ols_fit(y, U, cfg.r)
    rep = diagnostics.identify(reg.residuals, seasons=cfg.seasons, max_lag=cfg.max_lag)
    per_rows, cor_rows, test_rows = [], [], []
    for v in rep.verdicts:
        sp = v.spectrogram
        if v.spec.d == 0:
            per_rows += [(v.name, int(k), p, pw) for k, p, pw in zip(sp.k, sp.periods, sp.power)]
        a, pa = rep.acfs[v.name], rep.pacfs[v.name]
        cor_rows += [(v.name, int(lag), a.values[i], pa.values[i], a.confidence_band)
                     for i, lag in enumerate(a.lags)]
        periodic = v.periodic()
        test_rows.append(
            [v.name, v.kpss.statistic, v.kpss.critical_values[v.kpss.level], v.kpss.reject,
             v.adf.statistic, v.adf.critical_values[v.adf.level], v.adf.lags_used, v.adf.reject,
             v.verdict]
            + [v.seasonal_ratios[s] for s in cfg.seasons]
            + ["periodic" if periodic else "quasi-aperiodic"]
        )
    write_table(out / "periodogram.csv", ["series", "k", "period", "power"], per_rows)
    write_table(out / "correlogram.csv", ["series", "lag", "acf", "pacf", "band"], cor_rows)
    write_table(
        out / "stationarity.csv",
        ["series", "kpss_stat", "kpss_cv", "kpss_reject", "adf_stat", "adf_cv", "adf_lags",
         "adf_reject", "verdict"] + [f"peak_ratio_{s}" for s in cfg.seasons] + ["seasonality"],
        test_rows,
    )
    periods = ", ".join(f"{p:.2f}" for p, _ in rep.dominant_periods)
    print(f"dominant periods: {periods}")
    print(f"seasonal period: {rep.seasonal_period or 'none detected'}")
    for row in test_rows:
        print(f"{row[0]:>14}: {row[8]:<15} {row[-1]}")
    log.info("diagnose: dominant periods %s; seasonal period %s", periods, rep.seasonal_period)


def _single_order(args, cfg) -> SarimaxOrder:
    orders = cfg.parsed_orders()
    if args.order:
        return orders[0]
    raise UsageError("this command needs --order p,d,q,r,P,D,Q")


def _fit_kwargs(cfg):
    return {"whiteness_lag": cfg.whiteness_lag, "whiteness_level": cfg.whiteness_level}


def _fit(C, U, order, cfg):
    y = log_transform(C, cfg.mu)
    model, report, reg = fit_sarimax(y, U, order, **_fit_kwargs(cfg))
    model = replace(model, mu=cfg.mu, window=len(C))
    if not model.converged:
        log.warning("%s: optimizer did not converge", order)
    return y, model, report


def cmd_fit(args, cfg, out):
    C, U = _load(args, cfg)
    order = _single_order(args, cfg)
    C = _window(C, cfg)
    y, model, report = _fit(C, U, order, cfg)
    (out / "model.txt").write_text(model_to_text(model))
    write_table(out / "fit_report.csv", ["order"] + REPORT_COLS,
                [[_order_label(order)] + _report_row(report)])
    try:
        tstats = coefficient_tstats(model)
    except NumericalError as exc:
        log.warning("t statistics unavailable: %s", exc)
        tstats = {}
    coef_rows = [(f"c{k}", c, "", "") for k, c in enumerate(model.exog_coef)]
    coef_rows += [(name, est, (model.stderr or {}).get(name, ""), tstats.get(name, ""))
                  for name, est in model.params().items()]
    coef_rows.append(("sigma2", model.sigma2, "", ""))
    write_table(out / "coefficients.csv", ["name", "estimate", "stderr", "t"], coef_rows)
    fitted, _ = in_sample(model, y, U)
    obs = y.values[len(y) - len(fitted):]
    write_table(
        out / "plot_fit.csv",
        ["time", "observed_log", "fitted_log", "observed", "fitted"],
        zip(fitted.times(), obs, fitted.values, inverse_values(obs, cfg.mu),
            inverse_values(fitted.values, cfg.mu)),
    )
    print(f"{order}: " + "  ".join(f"{k}={fmt(v)}" for k, v in report.row().items()))


REPORT_COLS = ["AIC", "SBC", "LL", "VAR", "WN", "k", "T", "converged", "status"]


def _report_row(report) -> list:
    return [report.aic, report.sbc, report.loglik, report.var, report.wn, report.k, report.t,
            report.converged, "ok"]


def cmd_select(args, cfg, out):
    C, U = _load(args, cfg)
    C = _window(C, cfg)
    rows = []
    for order in cfg.parsed_orders():
        try:
            _, _, report = _fit(C, U, order, cfg)
            rows.append([_order_label(order)] + _report_row(report))
        except (DataError, NumericalError) as exc:
            log.warning("%s: fit failed: %s", order, exc)
            rows.append([_order_label(order)] + [math.nan] * 4 + ["", "", "", False, "failed"])
    write_table(out / "select.csv", ["order"] + REPORT_COLS, rows)
    ok = [r for r in rows if r[-1] == "ok"]
    if not ok:
        raise NumericalError("no candidate model could be fitted")
    for col, name in ((1, "AIC"), (2, "SBC")):
        best = min(ok, key=lambda r: r[col])
        print(f"best by {name}: {best[0]} ({fmt(best[col])})")


def cmd_forecast(args, cfg, out):
    C, U = _load(args, cfg)
    order = _single_order(args, cfg)
    C = _window(C, cfg)
    y, model, _ = _fit(C, U, order, cfg)
    (out / "model.txt").write_text(model_to_text(model))
    fc = predict(model, y, U, h=cfg.horizon, levels=cfg.levels, mu=cfg.mu)
    tags = [f"{round(100 * lvl):g}" for lvl in cfg.levels]
    header = ["time", "point_log"]
    header += [f"{b}{t}_log" for t in tags for b in ("lo", "hi")]
    header += ["point"] + [f"{b}{t}" for t in tags for b in ("lo", "hi")]
    rows = []
    for j in range(fc.horizon):
        row = [fc.times[j], fc.point_log[j]]
        row += [fc.bands_log[lvl][side][j] for lvl in cfg.levels for side in (0, 1)]
        row += [fc.point_consumption[j]]
        row += [fc.bands_consumption[lvl][side][j] for lvl in cfg.levels for side in (0, 1)]
        rows.append(row)
    write_table(out / "forecast.csv", header, rows)
    if fc.n_negative:
        log.warning("%d forecast values are negative on the consumption scale", fc.n_negative)
    fitted, _ = in_sample(model, y, U)
    tail = min(len(fitted), 7 * cfg.season)
    hist = [(fitted.time_at(i), C.values[C.index_of(fitted.time_at(i))], fitted_c, "")
            for i, fitted_c in zip(range(len(fitted) - tail, len(fitted)),
                                   inverse_values(fitted.values[-tail:], cfg.mu))]
    fut = [(t, "", "", p) for t, p in zip(fc.times, fc.point_consumption)]
    write_table(out / "plot_forecast.csv", ["time", "observed", "fitted", "forecast"], hist + fut)
    print(f"{order}: {fc.horizon}-step forecast from {fmt(fc.times[0])} written to forecast.csv")


def cmd_evaluate(args, cfg, out):
    C, U = _load(args, cfg)
    m_values = [cfg.window] if cfg.window is not None else list(cfg.m_values)
    orders = cfg.parsed_orders()
    grid = grid_search(C, U, orders, r_values=cfg.r_values, m_values=m_values, n=cfg.days,
                       h=cfg.horizon, mu=cfg.mu, n_jobs=cfg.jobs, **_fit_kwargs(cfg))
    rows = []
    for rank, cell in enumerate(grid.ranked, start=1):
        rep = cell.report
        rows.append([rank, _order_label(cell.order), cell.order.r, cell.m, rep.c_a, rep.c_r,
                     rep.c_r_log, rep.n, len(rep.failed), rep.coverage])
        for i, msg in rep.failed:
            log.warning("%s M=%d window %d excluded: %s", cell.order, cell.m, i, msg)
    write_table(out / "evaluate.csv",
                ["rank", "order", "r", "M", "C_A", "C_R", "C_R_log", "windows", "failed",
                 "coverage"], rows)
    best = grid.best
    mat = grid.cr_matrix(best.order)
    write_table(out / "cr_matrix.csv", ["r"] + [f"M={m}" for m in grid.m_values],
                [[r] + list(mat[i]) for i, r in enumerate(grid.r_values)])
    plot = []
    for o, fcv in zip(best.report.origins, best.report.forecasts):
        plot += [(C.time_at(o + j), C.values[o + j], fcv[j]) for j in range(len(fcv))]
    write_table(out / "plot_evaluate.csv", ["time", "actual", "forecast"], plot)
    print(f"best: {_order_label(best.order)} M={best.m}  C_A={fmt(best.report.c_a)}  "
          f"C_R={fmt(best.report.c_r)}")


def cmd_simulate(args, cfg, out):
    from .simulate import simulate_load
    order = _single_order(args, cfg)
    coef = _parse_coefs(args.coef)
    every = args.temp_every
    total = args.length + args.future
    total += (1 - total) % every  # the subsampled temperatures must reach the last hour
    d = simulate_load(order, total, coef.pop("c", [7.5, 0.03]), seed=cfg.seed, mu=cfg.mu,
                      **coef)
    u = d.temperature
    c = d.consumption.slice(0, args.length)
    write_table(out / "consumption.csv", ["time", "consumption"], zip(c.times(), c.values))
    write_table(out / "temperature.csv", ["time", "temperature"],
                [(u.time_at(i), u.values[i]) for i in range(0, len(u), every)])
    print(f"simulated {args.length} observations of {order}")


def _parse_coefs(text: str) -> dict:
    out = {}
    for item in (text or "").split():
        key, sep, value = item.partition("=")
        if not sep or key not in ("a", "b", "alpha", "beta", "c", "sigma2"):
            raise UsageError(f"bad coefficient {item!r}; use a=.. b=.. alpha=.. beta=.. c=.. sigma2=..")
        nums = [float(v) for v in value.split(",") if v]
        out[key] = nums[0] if key == "sigma2" else nums
    return out


COMMANDS = {
    "ingest": cmd_ingest,
    "diagnose": cmd_diagnose,
    "fit": cmd_fit,
    "select": cmd_select,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mu", type=float)
    common.add_argument("--season", type=int)
    common.add_argument("--order", action="append",
                        help="p,d,q,r,P,D,Q[,s]; repeat for a grid")
    common.add_argument("--window", type=int, help="training window M (observations)")
    common.add_argument("--horizon", type=int)
    common.add_argument("--days", type=int, help="number of rolling forecast blocks N")
    common.add_argument("--levels", help="confidence levels, e.g. 90,95")
    common.add_argument("--seed", type=int)
    common.add_argument("--r-values", help="regression dimensions for evaluate, e.g. 1,2,3")
    common.add_argument("--m-values", help="window lengths for evaluate, e.g. 548,730")
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="loadsarimax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "simulate":
            p.add_argument("--length", type=int, default=2190)
            p.add_argument("--coef", default="a=0.9 beta=0.8 c=7.5,0.03 sigma2=0.01")
            p.add_argument("--temp-every", type=int, default=3,
                           help="keep every k-th temperature value")
            p.add_argument("--future", type=int, default=24,
                           help="temperatures to emit past the last consumption value")
        else:
            p.add_argument("consumption")
            p.add_argument("temperature")
    return parser


def make_config(args) -> Config:
    cfg = Config()
    if args.config:
        try:
            cfg = Config.from_text(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    upd = {}
    for key in ("mu", "season", "window", "horizon", "days", "seed", "out", "jobs"):
        if getattr(args, key) is not None:
            upd[key] = getattr(args, key)
    try:
        if args.levels:
            upd["levels"] = parse_levels(args.levels)
        if args.r_values:
            upd["r_values"] = tuple(int(v) for v in args.r_values.split(","))
        if args.m_values:
            upd["m_values"] = tuple(int(v) for v in args.m_values.split(","))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.order:
        upd["orders"] = tuple(args.order)
    cfg = replace(cfg, **upd)
    cfg.parsed_orders()  # validate early
    return cfg


def _setup_logging(out: Path, verbose: bool):
    log.setLevel(logging.INFO)
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    fh = logging.FileHandler(out / "run.log", mode="a")
    fh.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    sh = logging.StreamHandler(sys.stderr)
    sh.setLevel(logging.INFO if verbose else logging.WARNING)
    sh.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    log.addHandler(fh)
    log.addHandler(sh)
    log.propagate = False
    return fh


def _fail(code: int, kind: str, exc: Exception, handler) -> int:
    if handler is None:
        print(f"{kind}: {exc}", file=sys.stderr)
    else:  # reaches stderr through the stream handler as well
        log.error("%s: %s", kind, exc)
    return code


def main(argv=None) -> int:
    handler = None
    try:
        args = build_parser().parse_args(argv)
        cfg = make_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = _setup_logging(out, args.verbose)
        log.info("command %s", " ".join(argv if argv is not None else sys.argv[1:]))
        COMMANDS[args.command](args, cfg, out)
        return 0
    except UsageError as exc:
        return _fail(1, "usage error", exc, handler)
    except DataError as exc:
        return _fail(2, "data error", exc, handler)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        return _fail(3, "numerical failure", exc, handler)
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
