"""Forecast evaluation: the seven loss measures, Diebold-Mariano and
conditional-predictive-ability tests, and the three backtesting schemes
(fixed, increasing, rolling window) comparing the linear component model
against the vine-copula conditional-expectation forecast."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from cvhar.errors import DataError, FitError
from cvhar.har import HarModel, fit_har, har_forecast
from cvhar.margins import fit_margin
from cvhar.vine import CVineModel, fit_cvine, conditional_expectation

SCHEMES = ("FW", "IW", "RW")

WINDOW_GRID = {"FW": (250, 500, 750, 1250), "IW": (250, 500, 750),
               "RW": (250, 500, 750)}

MARGIN_KINDS = {"E": "ecdf", "K": "kernel", "P": "inverse_gaussian"}

LOSS_NAMES = ("mse", "mae", "mad", "mase", "mape", "mda", "qlik")

TEST_LOSS_KINDS = ("squared", "absolute", "qlik")


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    window: int
    margin_kind: str = "E"  # E = ecdf, K = kernel, P = inverse_gaussian
    family_set: str = "AGT"
    independence_alpha: float | None = None
    allow_any_window: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DataError(f"unknown scheme {self.scheme!r}")
        if self.margin_kind not in MARGIN_KINDS:
            raise DataError(f"margin kind must be one of {set(MARGIN_KINDS)}")
        if not self.allow_any_window and self.window not in WINDOW_GRID[self.scheme]:
            raise DataError(
                f"window {self.window} outside the standard grid "
                f"{WINDOW_GRID[self.scheme]} for {self.scheme}; "
                f"set allow_any_window to override")


@dataclass(frozen=True)
class ForecastRecord:
    date: object
    y: float
    yhat_har: float
    yhat_cvhar: float
    scheme: str
    window: int
    har_negative: bool = False


@dataclass(frozen=True)
class TestResult:
    name: str
    loss_kind: str
    statistic: float
    p_value: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)

    def to_dict(self) -> dict:
        return {"name": self.name, "loss_kind": self.loss_kind,
                "statistic": self.statistic, "p_value": self.p_value,
                "stars": self.stars}


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def loss_measures(y, yhat) -> dict:
    """The seven measures.  QLIK is averaged over days with a positive
    forecast only; the exclusion count is reported under 'qlik_excluded'.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.size < 2:
        raise DataError("need equal-length series with at least 2 points")
    if np.any(y <= 0.0):
        raise DataError("realized values must be positive")
    err = y - yhat
    abs_err = np.abs(err)
    naive_scale = np.mean(np.abs(np.diff(y)))
    pos = yhat > 0.0
    ratio = y[pos] / yhat[pos]
    dy = np.sign(np.diff(y))
    dyhat = np.sign(yhat[1:] - y[:-1])
    return {
        "mse": float(np.mean(err ** 2)),
        "mae": float(np.mean(abs_err)),
        "mad": float(np.median(abs_err)),
        "mase": float(np.mean(abs_err) / naive_scale) if naive_scale > 0 else np.inf,
        "mape": float(np.mean(abs_err / y)),
        "mda": float(np.mean(dy == dyhat)),
        "qlik": float(np.mean(ratio - np.log(ratio) - 1.0)) if pos.any() else np.nan,
        "qlik_excluded": int(np.sum(~pos)),
    }


def loss_series(y, yhat, kind: str) -> np.ndarray:
    """Per-day losses used by the comparison tests."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if kind == "squared":
        return (y - yhat) ** 2
    if kind == "absolute":
        return np.abs(y - yhat)
    if kind == "qlik":
        if np.any(yhat <= 0.0):
            raise DataError("qlik losses need positive forecasts")
        r = y / yhat
        return r - np.log(r) - 1.0
    raise DataError(f"unknown loss kind {kind!r}")


def dm_test(loss_a, loss_b, loss_kind: str = "squared") -> TestResult:
    """Diebold-Mariano with lag-0 variance (one-step forecasts).

    d_t = loss_a - loss_b; call with the linear model's losses first so a
    positive statistic favours the vine forecast.
    """
    d = np.asarray(loss_a, dtype=float) - np.asarray(loss_b, dtype=float)
    n = d.size
    if n < 30:
        raise DataError(f"DM test needs at least 30 differentials, got {n}")
    var = float(np.var(d, ddof=1))
    if var <= 0.0:
        raise DataError("zero-variance loss differential (identical forecasts)")
    stat = float(np.mean(d) / np.sqrt(var / n))
    p = float(2.0 * stats.norm.sf(abs(stat)))
    return TestResult(name="DM", loss_kind=loss_kind, statistic=stat, p_value=p)


def cpa_test(loss_a, loss_b, loss_kind: str = "squared") -> TestResult:
    """Conditional-predictive-ability test with instruments (1, d_{t-1}).

    Z_t = h_{t-1} d_t; statistic m * Zbar' Omega^{-1} Zbar ~ chi2(2) where
    Omega is the sample second-moment matrix of Z.
    """
    d = np.asarray(loss_a, dtype=float) - np.asarray(loss_b, dtype=float)
    n = d.size
    if n < 50:
        raise DataError(f"CPA test needs at least 50 differentials, got {n}")
    if float(np.var(d)) <= 0.0:
        raise DataError("degenerate loss differential")
    h = np.column_stack([np.ones(n - 1), d[:-1]])
    z = h * d[1:, None]
    m = len(z)
    zbar = z.mean(axis=0)
    omega = z.T @ z / m
    try:
        stat = float(m * zbar @ np.linalg.solve(omega, zbar))
    except np.linalg.LinAlgError as exc:
        raise FitError("singular CPA covariance matrix") from exc
    p = float(stats.chi2.sf(stat, df=2))
    return TestResult(name="CPA", loss_kind=loss_kind, statistic=stat, p_value=p)


@dataclass
class EvalReport:
    scheme: str
    window: int
    margin_kind: str
    family_set: str
    n_forecasts: int
    measures_har: dict
    measures_cvhar: dict
    ratios: dict
    tests: list = field(default_factory=list)
    in_sample: dict | None = None  # FW only

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "window": self.window,
            "margin_kind": self.margin_kind,
            "family_set": self.family_set,
            "n_forecasts": self.n_forecasts,
            "measures_har": self.measures_har,
            "measures_cvhar": self.measures_cvhar,
            "ratios": self.ratios,
            "tests": [t.to_dict() for t in self.tests],
            "in_sample": self.in_sample,
        }


def measure_ratios(measures_cvhar: dict, measures_har: dict) -> dict:
    """Quotient CV-HAR / HAR per measure; values below one favour the
    vine forecast for all measures except MDA (where larger is better)."""
    out = {}
    for name in LOSS_NAMES:
        denom = measures_har[name]
        out[name] = float(measures_cvhar[name] / denom) if denom else np.nan
    return out


def fit_cvhar_window(frame: pd.DataFrame, margin_kind: str,
                     family_set: str, independence_alpha=None):
    """Fit margins and vine on one estimation window.

    Returns (model, margins) with margins ordered (monthly, weekly, daily,
    target); the target shares the daily margin since it is the same
    variable one day ahead.
    """
    kind = MARGIN_KINDS[margin_kind]
    m1 = fit_margin(frame["rk_m"].to_numpy(), kind)
    m2 = fit_margin(frame["rk_w"].to_numpy(), kind)
    m3 = fit_margin(frame["rk_d"].to_numpy(), kind)
    margins = (m1, m2, m3, m3)
    u = np.column_stack([
        m1.cdf(frame["rk_m"].to_numpy()),
        m2.cdf(frame["rk_w"].to_numpy()),
        m3.cdf(frame["rk_d"].to_numpy()),
        m3.cdf(frame["target"].to_numpy()),
    ])
    model = fit_cvine(u, family_set, independence_alpha=independence_alpha)
    return model, margins


def _forecast_row(row, har_model, vine_model, margins, scheme, window):
    yhat_har, negative = har_forecast(har_model, row.rk_d, row.rk_w, row.rk_m)
    yhat_cv = conditional_expectation(vine_model, margins,
                                      (row.rk_m, row.rk_w, row.rk_d))
    return ForecastRecord(date=row.date, y=float(row.target),
                          yhat_har=yhat_har, yhat_cvhar=float(yhat_cv),
                          scheme=scheme, window=window, har_negative=negative)


def run_scheme(components: pd.DataFrame, cfg: SchemeConfig):
    """Backtest both models over one component series.

    FW fits once on the first W rows and reports in-sample fitted values on
    those plus out-of-sample forecasts for every later row.  IW and RW refit
    each day d on all prior rows (IW) or the trailing W rows (RW) and
    forecast row d, for d = W+1 .. N-1 (0-based), yielding N-1-W records.
    """
    n = len(components)
    W = cfg.window
    if n <= W + 1:
        raise DataError(f"series length {n} too short for window {W}")
    records = []
    if cfg.scheme == "FW":
        train = components.iloc[:W]
        har_model = fit_har(train)
        vine_model, margins = fit_cvhar_window(
            train, cfg.margin_kind, cfg.family_set, cfg.independence_alpha)
        in_recs = [_forecast_row(r, har_model, vine_model, margins, "FW", W)
                   for r in train.itertuples()]
        records = [_forecast_row(r, har_model, vine_model, margins, "FW", W)
                   for r in components.iloc[W:].itertuples()]
        report = _build_report(records, cfg)
        report.in_sample = {
            "measures_har": loss_measures([r.y for r in in_recs],
                                          [r.yhat_har for r in in_recs]),
            "measures_cvhar": loss_measures([r.y for r in in_recs],
                                            [r.yhat_cvhar for r in in_recs]),
        }
        return records, report
    for d in range(W + 1, n):
        lo = 0 if cfg.scheme == "IW" else d - W
        train = components.iloc[lo:d]
        har_model = fit_har(train)
        vine_model, margins = fit_cvhar_window(
            train, cfg.margin_kind, cfg.family_set, cfg.independence_alpha)
        records.append(_forecast_row(next(components.iloc[[d]].itertuples()),
                                     har_model, vine_model, margins,
                                     cfg.scheme, W))
    return records, _build_report(records, cfg)


def _build_report(records, cfg: SchemeConfig) -> EvalReport:
    y = np.array([r.y for r in records])
    yhat_har = np.array([r.yhat_har for r in records])
    yhat_cv = np.array([r.yhat_cvhar for r in records])
    m_har = loss_measures(y, yhat_har)
    m_cv = loss_measures(y, yhat_cv)
    tests = []
    run_dm = cfg.scheme == "RW"
    run_cpa = cfg.scheme in ("IW", "RW")
    for kind in TEST_LOSS_KINDS:
        if kind == "qlik":
            ok = yhat_har > 0.0
            if ok.sum() < len(y):
                ya, ha, ca = y[ok], yhat_har[ok], yhat_cv[ok]
            else:
                ya, ha, ca = y, yhat_har, yhat_cv
        else:
            ya, ha, ca = y, yhat_har, yhat_cv
        try:
            la = loss_series(ya, ha, kind)
            lb = loss_series(ya, ca, kind)
            if run_dm:
                tests.append(dm_test(la, lb, kind))
            if run_cpa:
                tests.append(cpa_test(la, lb, kind))
        except (DataError, FitError):
            pass  # too few records or degenerate differentials: skip test
    return EvalReport(
        scheme=cfg.scheme, window=cfg.window, margin_kind=cfg.margin_kind,
        family_set=cfg.family_set, n_forecasts=len(records),
        measures_har=m_har, measures_cvhar=m_cv,
        ratios=measure_ratios(m_cv, m_har), tests=tests)


def aggregate_instruments(per_stock: list) -> dict:
    """Combine per-instrument (y, yhat) pairs into one measure set.

    MSE, MAE, MAD, MAPE and QLIK pool the daily residuals across
    instruments; MDA and MASE are only defined per series, so those are
    averaged over instruments.
    """
    if not per_stock:
        raise DataError("no instruments to aggregate")
    ys = [np.asarray(y, dtype=float) for y, _ in per_stock]
    yhats = [np.asarray(yh, dtype=float) for _, yh in per_stock]
    pooled = loss_measures(np.concatenate(ys), np.concatenate(yhats))
    per = [loss_measures(y, yh) for y, yh in zip(ys, yhats)]
    pooled["mda"] = float(np.mean([m["mda"] for m in per]))
    pooled["mase"] = float(np.mean([m["mase"] for m in per]))
    return pooled


def records_to_csv(records, path) -> None:
    pd.DataFrame(
        {
            "date": [r.date for r in records],
            "y": [r.y for r in records],
            "yhat_har": [r.yhat_har for r in records],
            "yhat_cvhar": [r.yhat_cvhar for r in records],
            "scheme": [r.scheme for r in records],
            "window": [r.window for r in records],
            "har_negative": [r.har_negative for r in records],
        }
    ).to_csv(path, index=False)


def records_from_csv(path) -> list:
    df = pd.read_csv(path)
    return [
        ForecastRecord(date=row.date, y=float(row.y),
                       yhat_har=float(row.yhat_har),
                       yhat_cvhar=float(row.yhat_cvhar),
                       scheme=str(row.scheme), window=int(row.window),
                       har_negative=bool(row.har_negative))
        for row in df.itertuples()
    ]
