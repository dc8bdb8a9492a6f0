"""Command-line front end: clean ticks, compute realized-kernel series,
fit the models, forecast, backtest, and simulate from a fitted vine."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, fields
from datetime import time as Time
from pathlib import Path

import click
import numpy as np
import pandas as pd

from cvhar.errors import CvharError, DataError
from cvhar import ingest, realized, evaluate
from cvhar.har import HarModel, fit_har, har_forecast
from cvhar.margins import Margin
from cvhar.vine import CVineModel, conditional_expectation, simulate_cvine

EXIT_DOMAIN = 1
EXIT_IO = 2


@dataclass
class RunConfig:
    """Every knob of a run; round-trips losslessly through JSON."""

    session_open: str = "09:30"
    session_close: str = "16:00"
    keep_exchange: str | None = None
    bad_condition_codes: list = None
    mad_multiplier: float = 10.0
    mad_window_seconds: float = 120.0
    min_ticks: int = ingest.DEFAULT_MIN_TICKS_PER_DAY
    sparse_seconds: float = 1200.0
    margin_kind: str = "E"
    family_set: str = "AGT"
    scheme: str = "RW"
    window: int = 500
    independence_alpha: float | None = None
    quad_rel_tol: float = 1e-6
    tail_quantile: float = 1.0 - 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.bad_condition_codes is None:
            self.bad_condition_codes = []

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise DataError(f"unknown config keys: {sorted(bad)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def cleaning_config(self) -> ingest.CleaningConfig:
        return ingest.CleaningConfig(
            session_open=_parse_time(self.session_open),
            session_close=_parse_time(self.session_close),
            keep_exchange=self.keep_exchange,
            bad_condition_codes=frozenset(self.bad_condition_codes),
            mad_multiplier=self.mad_multiplier,
            mad_window_seconds=self.mad_window_seconds,
        )


def _parse_time(s: str) -> Time:
    hh, mm = s.split(":")
    return Time(int(hh), int(mm))


def _fail(exc: Exception, code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _load_config(config_path, **overrides) -> RunConfig:
    try:
        cfg = RunConfig.load(config_path) if config_path else RunConfig()
    except (OSError, json.JSONDecodeError, DataError) as exc:
        _fail(exc, EXIT_IO)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


@click.group()
def main():
    """Realized-kernel volatility forecasting with a vine-copula HAR model."""


@main.command()
@click.argument("tick_csv", type=click.Path())
@click.option("--output", "-o", required=True, type=click.Path())
@click.option("--report", type=click.Path(), default=None,
              help="Cleaning-report JSON path.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--keep-exchange", default=None)
@click.option("--bad-conditions", default=None,
              help="Comma-separated sale-condition codes to drop.")
def clean(tick_csv, output, report, config_path, keep_exchange, bad_conditions):
    """Parse and clean a tick CSV."""
    cfg = _load_config(config_path, keep_exchange=keep_exchange)
    if bad_conditions is not None:
        cfg.bad_condition_codes = [c for c in bad_conditions.split(",") if c]
    try:
        ticks, n_malformed = ingest.parse_ticks(tick_csv)
    except (OSError, DataError) as exc:
        _fail(exc, EXIT_IO)
    try:
        clean_ticks, clean_report = ingest.clean_ticks(ticks, cfg.cleaning_config())
    except CvharError as exc:
        _fail(exc, EXIT_DOMAIN)
    clean_ticks.to_csv(output, index=False)
    payload = {"config": cfg.to_dict(), "n_malformed": n_malformed,
               **clean_report.to_dict()}
    if report:
        Path(report).write_text(json.dumps(payload, indent=2) + "\n")
    click.echo(json.dumps(payload))


@main.command()
@click.argument("clean_csv", type=click.Path())
@click.option("--rk-output", required=True, type=click.Path())
@click.option("--components-output", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def rk(clean_csv, rk_output, components_output, config_path):
    """Daily realized-kernel series and component series from cleaned ticks."""
    cfg = _load_config(config_path)
    try:
        ticks = pd.read_csv(clean_csv, parse_dates=["timestamp"])
    except (OSError, ValueError) as exc:
        _fail(exc, EXIT_IO)
    try:
        sessions = ingest.to_daily_sessions(ticks, min_ticks=cfg.min_ticks)
        estimates = []
        for s in sessions:
            if s.insufficient:
                continue
            H = realized.select_bandwidth(s, sparse_seconds=cfg.sparse_seconds)
            estimates.append(realized.realized_kernel(s, H))
        components = realized.build_components(estimates)
    except CvharError as exc:
        _fail(exc, EXIT_DOMAIN)
    realized.rk_series_to_csv(estimates, rk_output)
    realized.components_to_csv(components, components_output)
    click.echo(json.dumps({"config": cfg.to_dict(), "n_days": len(estimates),
                           "n_component_rows": len(components)}))


def _fit_models(components, cfg: RunConfig):
    har_model = fit_har(components)
    vine_model, margins = evaluate.fit_cvhar_window(
        components, cfg.margin_kind, cfg.family_set, cfg.independence_alpha)
    return har_model, vine_model, margins


def _models_to_dict(har_model, vine_model, margins, cfg) -> dict:
    return {
        "config": cfg.to_dict(),
        "har": har_model.to_dict(),
        "vine": vine_model.to_dict(),
        "margins": [m.to_dict() for m in margins],
    }


def _models_from_dict(d):
    return (HarModel.from_dict(d["har"]), CVineModel.from_dict(d["vine"]),
            tuple(Margin.from_dict(m) for m in d["margins"]))


@main.command()
@click.argument("components_csv", type=click.Path())
@click.option("--output", "-o", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--margin-kind", type=click.Choice(["E", "K", "P"]), default=None)
@click.option("--family-set", type=click.Choice(["A", "AGT"]), default=None)
def fit(components_csv, output, config_path, margin_kind, family_set):
    """Fit the linear model, margins and vine on a component series."""
    cfg = _load_config(config_path, margin_kind=margin_kind,
                       family_set=family_set)
    try:
        components = realized.components_from_csv(components_csv)
    except (OSError, ValueError, KeyError) as exc:
        _fail(exc, EXIT_IO)
    try:
        har_model, vine_model, margins = _fit_models(components, cfg)
    except CvharError as exc:
        _fail(exc, EXIT_DOMAIN)
    payload = _models_to_dict(har_model, vine_model, margins, cfg)
    Path(output).write_text(json.dumps(payload, indent=2) + "\n")
    click.echo(json.dumps({"total_loglik": vine_model.total_loglik,
                           "edges": {e: c.family
                                     for e, c in vine_model.pair_copulas.items()}}))


@main.command()
@click.argument("components_csv", type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--output", "-o", type=click.Path(), default=None)
def forecast(components_csv, model_path, output):
    """One-step-ahead forecast from the last component row."""
    try:
        components = realized.components_from_csv(components_csv)
        payload = json.loads(Path(model_path).read_text())
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc, EXIT_IO)
    cfg = RunConfig.from_dict(payload["config"])
    har_model, vine_model, margins = _models_from_dict(payload)
    row = components.iloc[-1]
    try:
        yhat_har, negative = har_forecast(har_model, row["rk_d"], row["rk_w"],
                                          row["rk_m"])
        yhat_cv = conditional_expectation(
            vine_model, margins, (row["rk_m"], row["rk_w"], row["rk_d"]),
            rel_tol=cfg.quad_rel_tol, tail_quantile=cfg.tail_quantile)
    except CvharError as exc:
        _fail(exc, EXIT_DOMAIN)
    result = {"date": str(row["date"]), "yhat_har": yhat_har,
              "har_negative": negative, "yhat_cvhar": yhat_cv}
    if output:
        Path(output).write_text(json.dumps(result, indent=2) + "\n")
    click.echo(json.dumps(result))


@main.command()
@click.argument("inputs", nargs=-1, type=click.Path())
@click.option("--manifest", type=click.Path(), default=None,
              help="Text file listing component CSVs, one per line.")
@click.option("--output-dir", "-d", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--scheme", type=click.Choice(list(evaluate.SCHEMES)), default=None)
@click.option("--window", type=int, default=None)
@click.option("--margin-kind", type=click.Choice(["E", "K", "P"]), default=None)
@click.option("--family-set", type=click.Choice(["A", "AGT"]), default=None)
@click.option("--any-window", is_flag=True,
              help="Allow windows outside the standard grid.")
def backtest(inputs, manifest, output_dir, config_path, scheme, window,
             margin_kind, family_set, any_window):
    """Backtest both models on one or more component series."""
    cfg = _load_config(config_path, scheme=scheme, window=window,
                       margin_kind=margin_kind, family_set=family_set)
    paths = list(inputs)
    if manifest:
        try:
            lines = Path(manifest).read_text().splitlines()
        except OSError as exc:
            _fail(exc, EXIT_IO)
        paths += [ln.strip() for ln in lines if ln.strip()]
    if not paths:
        _fail(DataError("no component CSVs given"), EXIT_IO)
    try:
        scheme_cfg = evaluate.SchemeConfig(
            scheme=cfg.scheme, window=cfg.window, margin_kind=cfg.margin_kind,
            family_set=cfg.family_set,
            independence_alpha=cfg.independence_alpha,
            allow_any_window=any_window)
    except CvharError as exc:
        _fail(exc, EXIT_IO)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    reports, cv_pairs, har_pairs = [], [], []
    for path in paths:
        try:
            components = realized.components_from_csv(path)
        except (OSError, ValueError, KeyError) as exc:
            _fail(exc, EXIT_IO)
        try:
            records, report = evaluate.run_scheme(components, scheme_cfg)
        except CvharError as exc:
            _fail(exc, EXIT_DOMAIN)
        stem = Path(path).stem
        evaluate.records_to_csv(records, out / f"forecasts_{stem}.csv")
        reports.append({"instrument": stem, **report.to_dict()})
        y = [r.y for r in records]
        cv_pairs.append((y, [r.yhat_cvhar for r in records]))
        har_pairs.append((y, [r.yhat_har for r in records]))
    summary = {"config": cfg.to_dict(), "instruments": reports}
    if len(cv_pairs) > 1:
        agg_cv = evaluate.aggregate_instruments(cv_pairs)
        agg_har = evaluate.aggregate_instruments(har_pairs)
        summary["aggregate"] = {
            "measures_har": agg_har,
            "measures_cvhar": agg_cv,
            "ratios": evaluate.measure_ratios(agg_cv, agg_har),
        }
    (out / "report.json").write_text(json.dumps(summary, indent=2) + "\n")
    click.echo(json.dumps({"output_dir": str(out),
                           "n_instruments": len(paths)}))


@main.command()
@click.argument("model_json", type=click.Path())
@click.option("--n", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--output", "-o", required=True, type=click.Path())
def simulate(model_json, n, seed, output):
    """Draw uniform-scale samples from a fitted vine (verification oracle)."""
    try:
        payload = json.loads(Path(model_json).read_text())
        vine_model = CVineModel.from_dict(payload["vine"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc, EXIT_IO)
    cfg_seed = payload.get("config", {}).get("seed", 0)
    try:
        u = simulate_cvine(vine_model, n, seed if seed is not None else cfg_seed)
    except CvharError as exc:
        _fail(exc, EXIT_DOMAIN)
    pd.DataFrame(u, columns=["u1", "u2", "u3", "u4"]).to_csv(output, index=False)
    click.echo(json.dumps({"n": n, "output": output}))


if __name__ == "__main__":
    main()
