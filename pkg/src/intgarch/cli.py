"""Command-line entry point.

Subcommands: simulate | fit | forecast | acf | prepare | backtest | table1.
Exit codes: 0 ok, 2 bad input, 3 numerical failure, 4 non-convergence.

Every run writes its resolved configuration (and seed, for randomized
commands) into the output header as `# key = value` comment lines, which
the CSV loaders skip. A --config file (JSON object or flat key=value
lines) supplies defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys

import numpy as np

from . import __version__
from .estimate import FitOptions, FittedModel, fit_mle
from .evaluate import (
    BENCHMARK_DESIGNS,
    render_reports,
    render_study,
    reports_to_csv,
    run_backtest,
    simulation_study,
    study_to_csv,
)
from .exceptions import ConvergenceError, DataError, IntGarchError, NumericalError
from .forecast import forecast
from .intervals import IntervalSeries, sample_acf
from .marketdata import (
    SessionSpec,
    clean_quotes,
    interval_returns,
    load_csv,
    resample_to_grid,
    save_bars_csv,
    save_intervals_csv,
)
from .process import (
    InitMode,
    ModelOrders,
    ModelParams,
    mean_stationarity,
    theoretical_acf,
)
from .simulate import SimConfig, simulate

__all__ = ["main", "build_parser"]


def _parse_orders(text: str) -> ModelOrders:
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise DataError(f"orders must be 'p,q' or 'p,q,w', got {text!r}")
    try:
        nums = [int(x) for x in parts]
    except ValueError as exc:
        raise DataError(f"orders must be integers, got {text!r}") from exc
    if len(nums) == 2:
        nums.append(0)
    return ModelOrders(*nums)


def _parse_horizons(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise DataError(f"horizons must be integers, got {text!r}") from exc


def _parse_time(text: str) -> _dt.time:
    try:
        return _dt.time.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"unparsable time {text!r}") from exc


def _load_model_json(path) -> tuple:
    """(ModelParams, FittedModel or None) from a model document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object")
    if "model" in doc:
        fitted = FittedModel.from_dict(doc)
        return fitted.params, fitted
    if "orders" in doc:
        return ModelParams.from_dict(doc), None
    raise DataError(f"{path}: neither a parameter nor a fit document")


def _resolve_seed(seed) -> int:
    """Explicit seed, or a fresh recorded one."""
    if seed is not None:
        return int(seed)
    return int(np.random.SeedSequence().entropy)


def _meta(args, keys, **extra) -> dict:
    meta = {"command": args.command, "version": __version__}
    for key in keys:
        meta[key] = getattr(args, key.replace("-", "_"))
    meta.update(extra)
    return meta


def _synth_dates(n: int, start: _dt.date) -> list:
    """n consecutive weekdays from start (synthetic calendar for
    simulated series; intervals CSV needs date labels)."""
    out: list = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += _dt.timedelta(days=1)
    return out


def _write_table(path, meta: dict, body: str) -> None:
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k} = {v}\n")
        fh.write(body)


def _print(args, text: str) -> None:
    print(text, file=sys.stdout)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    params, _ = _load_model_json(args.model)
    seed = _resolve_seed(args.seed)
    stationary, weight_sum = mean_stationarity(params)
    if args.require_stationary and not stationary:
        raise DataError(
            f"model is not mean stationary: lag weight sum = {weight_sum:.6g} >= 1"
        )
    cfg = SimConfig(
        params=params,
        length=args.T,
        seed=seed,
        burn_in=args.burn_in,
        init_mode=InitMode(args.init),
    )
    series, h = simulate(cfg)
    start = _dt.date.fromisoformat(args.start_date)
    dates = _synth_dates(len(series), start)
    series = IntervalSeries(series.centers, series.radii, dates=tuple(dates))
    meta = _meta(
        args,
        ["model", "T", "burn_in", "init", "start_date"],
        seed=seed,
        weight_sum=f"{weight_sum:.6g}",
    )
    save_intervals_csv(series, args.out, meta=meta)
    if args.h_out:
        lines = "".join(f"{d.isoformat()},{float(x)!r}\n" for d, x in zip(dates, h))
        _write_table(args.h_out, meta, "date,h\n" + lines)
    _print(args, f"wrote {len(series)} intervals to {args.out} (seed {seed})")
    return 0


def _fit_summary(fitted: FittedModel) -> str:
    lines = [
        f"observations      {fitted.n_obs}",
        f"log-likelihood    {fitted.loglik:.6f}",
        f"converged         {fitted.converged}",
        f"iterations        {fitted.iterations}",
        f"max |gradient|    {fitted.gradient_max:.3e}",
        f"boundary          {', '.join(fitted.boundary) if fitted.boundary else '(none)'}",
        "",
        f"{'parameter':<10} {'estimate':>12} {'std error':>12}",
        f"{'k':<10} {fitted.params.k:>12.6f} {'-':>12}",
    ]
    named = dict(zip(fitted.params.param_names(), fitted.params.theta))
    for name, value in named.items():
        se = fitted.std_errors.get(name)
        se_txt = f"{se:.6f}" if se is not None else "-"
        lines.append(f"{name:<10} {value:>12.6f} {se_txt:>12}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    series = load_csv(args.data, "intervals")
    orders = _parse_orders(args.orders)
    options = FitOptions(init_mode=InitMode(args.init))
    fitted = fit_mle(series, orders, options)
    doc = fitted.to_dict()
    doc["run_config"] = _meta(args, ["data", "orders", "init"])
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    summary = _fit_summary(fitted)
    _print(args, summary)
    if args.summary_out:
        with open(args.summary_out, "w") as fh:
            fh.write(summary + "\n")
    if not fitted.converged:
        print("fit did not converge", file=sys.stderr)
        return 4
    return 0


def cmd_forecast(args) -> int:
    params, fitted = _load_model_json(args.model)
    series = load_csv(args.data, "intervals")
    origin = args.origin if args.origin is not None else len(series) - 1
    result = forecast(
        fitted if fitted is not None else params,
        series,
        args.horizon,
        origin_index=origin,
        init_mode=InitMode(args.init),
    )
    meta = _meta(
        args,
        ["model", "data", "horizon", "init"],
        origin_index=result.origin_index,
        origin_date=result.origin_date,
    )
    rows = "".join(
        f"{j + 1},{float(result.h_hat[j])!r},{float(result.sigma2[j])!r}\n"
        for j in range(args.horizon)
    )
    body = "step,h_hat,sigma2\n" + rows
    if args.out:
        _write_table(args.out, meta, body)
    _print(args, body.rstrip("\n"))
    return 0


def cmd_acf(args) -> int:
    series = load_csv(args.data, "intervals")
    sample = sample_acf(series, args.max_lag)
    theo = None
    if args.model:
        params, _ = _load_model_json(args.model)
        theo = theoretical_acf(params, args.max_lag)
    meta = _meta(args, ["data", "max_lag", "model"], n=len(series))
    if theo is None:
        body = "lag,sample_acf\n" + "".join(
            f"{s},{float(sample[s])!r}\n" for s in range(args.max_lag + 1)
        )
    else:
        body = "lag,sample_acf,theoretical_acf\n" + "".join(
            f"{s},{float(sample[s])!r},{float(theo[s])!r}\n" for s in range(args.max_lag + 1)
        )
    if args.out:
        _write_table(args.out, meta, body)
    _print(args, body.rstrip("\n"))
    return 0


def cmd_prepare(args) -> int:
    ticks = load_csv(args.ticks, "ticks")
    cleaned = clean_quotes(ticks)
    session = SessionSpec(
        start=_parse_time(args.session_start),
        end=_parse_time(args.session_end),
        grid_minutes=args.grid_minutes,
    )
    days = resample_to_grid(cleaned, session)
    if len(days) < 2:
        raise DataError("insufficient data: need at least 2 usable days")
    series = interval_returns(days)
    meta = _meta(
        args,
        ["ticks", "session_start", "session_end", "grid_minutes"],
        ticks_in=len(ticks),
        ticks_clean=len(cleaned),
        days=len(days),
        intervals=len(series),
    )
    save_intervals_csv(series, args.out_intervals, meta=meta)
    if args.out_bars:
        save_bars_csv(days, args.out_bars, meta=meta)
    _print(
        args,
        f"ticks in {len(ticks)}, after cleaning {len(cleaned)}, "
        f"days {len(days)}, intervals {len(series)}",
    )
    return 0


def cmd_backtest(args) -> int:
    days = load_csv(args.bars, "daily_bars")
    if len(days) < 3:
        raise DataError("insufficient data: need at least 3 days")
    series = interval_returns(days)
    rv = np.array([d.rv for d in days[1:]])
    have_closes = all(d.log_prices is not None for d in days)
    if have_closes:
        closes = np.array([d.log_prices[-1] for d in days])
        returns = np.diff(closes)
        returns_kind = "close-to-close"
    else:
        returns = None  # run_backtest falls back to interval centers
        returns_kind = "interval centers (no intraday closes in input)"
        print(
            "warning: bars carry no intraday prices; baseline uses interval centers",
            file=sys.stderr,
        )
    n = len(series)
    if args.train < 1:
        train_size = int(round(args.train * n))
    else:
        train_size = int(args.train)
    horizons = _parse_horizons(args.horizons)
    reports, info = run_backtest(
        series,
        rv,
        orders=_parse_orders(args.orders),
        train_size=train_size,
        horizons=horizons,
        refit_every=args.refit_every,
        options=FitOptions(init_mode=InitMode(args.init)),
        scalar_returns=returns,
        include_insample=args.insample,
        hmse_squared=args.hmse_squared,
        asset=args.asset,
    )
    meta = _meta(
        args,
        ["bars", "orders", "horizons", "refit_every", "insample", "hmse_squared", "asset"],
        train_size=train_size,
        n=n,
        baseline_returns=returns_kind,
        skipped_refits=len(info["skipped_refits"]),
    )
    if args.out:
        _write_table(args.out, meta, reports_to_csv(reports))
    if args.format == "csv":
        _print(args, reports_to_csv(reports).rstrip("\n"))
    else:
        _print(args, render_reports(reports))
    if info["skipped_refits"]:
        print(f"skipped refits: {len(info['skipped_refits'])}", file=sys.stderr)
    return 0


def cmd_table1(args) -> int:
    seed = _resolve_seed(args.seed)
    names = [x.strip() for x in args.designs.split(",") if x.strip()]
    unknown = [x for x in names if x not in BENCHMARK_DESIGNS]
    if unknown:
        raise DataError(
            f"unknown designs {unknown}; available: {', '.join(BENCHMARK_DESIGNS)}"
        )
    designs = {name: BENCHMARK_DESIGNS[name] for name in names}
    cells = simulation_study(
        designs,
        replications=args.reps,
        length=args.T,
        seed=seed,
        jobs=args.jobs,
    )
    meta = _meta(args, ["designs", "reps", "T", "jobs"], seed=seed)
    if args.out:
        _write_table(args.out, meta, study_to_csv(cells))
    if args.format == "csv":
        _print(args, study_to_csv(cells).rstrip("\n"))
    else:
        _print(args, render_study(cells))
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> tuple:
    """(parser, {command: (subparser, required dests)}).

    Required flags are enforced after the config merge, not by argparse,
    so a --config file can supply them.
    """
    parser = argparse.ArgumentParser(
        prog="intgarch",
        description="Interval-valued GARCH: simulate, fit, forecast, and evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict = {}

    def add(name, func, help_text, required):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="JSON or key=value defaults file (flags win)")
        commands[name] = (sp, required)
        return sp

    sp = add("simulate", cmd_simulate, "simulate an interval return series", ["model", "T", "out"])
    sp.add_argument("--model", help="model parameter JSON")
    sp.add_argument("--T", type=int, help="series length")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (recorded if omitted)")
    sp.add_argument("--burn-in", type=int, default=0, help="discarded warm-up steps")
    sp.add_argument("--init", choices=["zero", "mean"], default="zero", help="pre-sample h")
    sp.add_argument("--start-date", default="2000-01-03", help="first synthetic date")
    sp.add_argument("--require-stationary", action="store_true", help="refuse weight sum >= 1")
    sp.add_argument("--out", help="intervals CSV path")
    sp.add_argument("--h-out", default=None, help="optional h-path CSV")

    sp = add("fit", cmd_fit, "fit the model to an interval CSV", ["data", "out"])
    sp.add_argument("--data", help="intervals CSV")
    sp.add_argument("--orders", default="1,1,1", help="lag orders p,q[,w]")
    sp.add_argument("--init", choices=["zero", "mean"], default="mean", help="pre-sample h")
    sp.add_argument("--out", help="fit JSON path")
    sp.add_argument("--summary-out", default=None, help="optional text summary path")

    sp = add("forecast", cmd_forecast, "multi-step volatility forecast", ["model", "data", "horizon"])
    sp.add_argument("--model", help="model or fit JSON")
    sp.add_argument("--data", help="intervals CSV")
    sp.add_argument("--horizon", type=int, help="steps ahead")
    sp.add_argument("--origin", type=int, default=None, help="origin index (default: last)")
    sp.add_argument("--init", choices=["zero", "mean"], default="mean", help="pre-sample h")
    sp.add_argument("--out", default=None, help="optional CSV path")

    sp = add("acf", cmd_acf, "sample (and theoretical) autocorrelations", ["data"])
    sp.add_argument("--data", help="intervals CSV")
    sp.add_argument("--max-lag", type=int, default=20, help="largest lag")
    sp.add_argument("--model", default=None, help="optional model JSON for the overlay")
    sp.add_argument("--out", default=None, help="optional CSV path")

    sp = add("prepare", cmd_prepare, "clean ticks, grid, and build interval returns", ["ticks", "out_intervals"])
    sp.add_argument("--ticks", help="tick CSV (timestamp,bid,ask[,price])")
    sp.add_argument("--session-start", default="09:30", help="session open (HH:MM)")
    sp.add_argument("--session-end", default="16:00", help="session close (HH:MM)")
    sp.add_argument("--grid-minutes", type=int, default=5, help="grid spacing")
    sp.add_argument("--out-intervals", help="interval returns CSV path")
    sp.add_argument("--out-bars", default=None, help="optional daily bars CSV path")

    sp = add("backtest", cmd_backtest, "walk-forward comparison against GARCH(1,1)", ["bars", "train"])
    sp.add_argument("--bars", help="daily bars CSV (either layout)")
    sp.add_argument("--train", type=float, help="training rows (or fraction < 1)")
    sp.add_argument("--horizons", default="1,2,5", help="comma-separated horizons")
    sp.add_argument("--refit-every", type=int, default=1, help="origins between refits")
    sp.add_argument("--orders", default="1,1,1", help="lag orders p,q[,w]")
    sp.add_argument("--init", choices=["zero", "mean"], default="mean", help="pre-sample h")
    sp.add_argument("--insample", action="store_true", help="also report horizon 0")
    sp.add_argument("--hmse-squared", action="store_true", help="conventional squared HMSE")
    sp.add_argument("--asset", default="data", help="label for the reports")
    sp.add_argument("--format", choices=["text", "csv"], default="text", help="stdout format")
    sp.add_argument("--out", default=None, help="optional report CSV path")

    sp = add("table1", cmd_table1, "benchmark-design estimator recovery study", [])
    sp.add_argument("--designs", default="I,II,III,IV", help="subset, e.g. I,III")
    sp.add_argument("--reps", type=int, default=100, help="replications per design")
    sp.add_argument("--T", type=int, default=1000, help="series length")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (recorded if omitted)")
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--format", choices=["text", "csv"], default="text", help="stdout format")
    sp.add_argument("--out", default=None, help="optional CSV path")

    return parser, commands


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    text_stripped = text.lstrip()
    if text_stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError(f"{path}: config must be a JSON object")
        return {str(k): v for k, v in doc.items()}
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path} line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _apply_config(parser, commands, argv, args):
    """Merge --config values under the explicit flags and reparse."""
    cfg = _load_config_file(args.config)
    sp, _ = commands[args.command]
    known = set(vars(args)) - {"func"}
    defaults: dict = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise DataError(f"unknown config key {key!r} for command {args.command!r}")
        defaults[dest] = value
    sp.set_defaults(**defaults)
    reparsed = parser.parse_args(argv)
    # argparse skips type conversion for defaults; normalize the typed ones
    for action in sp._actions:
        if action.dest in defaults and action.type is not None:
            current = getattr(reparsed, action.dest)
            if isinstance(current, str):
                try:
                    setattr(reparsed, action.dest, action.type(current))
                except ValueError as exc:
                    raise DataError(f"config key {action.dest!r}: {exc}") from exc
    for dest in ("require_stationary", "insample", "hmse_squared"):
        if dest in defaults and isinstance(getattr(reparsed, dest, None), str):
            setattr(reparsed, dest, getattr(reparsed, dest).lower() in ("1", "true", "yes"))
    return reparsed


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args = _apply_config(parser, commands, argv, args)
        _, required = commands[args.command]
        missing = [d for d in required if getattr(args, d) is None]
        if missing:
            flags = ", ".join("--" + d.replace("_", "-") for d in missing)
            raise DataError(f"missing required flags: {flags}")
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except IntGarchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
