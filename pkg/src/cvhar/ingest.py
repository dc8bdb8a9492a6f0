"""Tick-data ingestion: CSV parsing and the cleaning rules applied before
realized-kernel estimation (session hours, zero prices, exchange and
sale-condition filters, same-timestamp median aggregation, MAD outliers)."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date as Date, time as Time

import numpy as np
import pandas as pd

from cvhar.errors import DataError

TICK_COLUMNS = ["timestamp", "price", "size", "exchange", "cond"]

DEFAULT_COLUMN_MAP = {c: c for c in TICK_COLUMNS}

DEFAULT_MIN_TICKS_PER_DAY = 20


@dataclass(frozen=True)
class CleaningConfig:
    session_open: Time = Time(9, 30)
    session_close: Time = Time(16, 0)
    keep_exchange: str | None = None
    bad_condition_codes: frozenset = frozenset()
    mad_multiplier: float = 10.0
    mad_window_seconds: float = 120.0

    def __post_init__(self):
        if self.mad_multiplier <= 0.0:
            raise DataError("mad_multiplier must be positive")
        if self.mad_window_seconds <= 0.0:
            raise DataError("mad_window_seconds must be positive")


@dataclass
class CleaningReport:
    """Ticks removed per rule; counts sum to input minus output length."""

    n_input: int = 0
    n_output: int = 0
    session_hours: int = 0
    zero_price: int = 0
    exchange: int = 0
    sale_condition: int = 0
    median_aggregation: int = 0
    mad_outlier: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class DaySession:
    date: Date
    timestamps: np.ndarray  # int64 nanoseconds
    prices: np.ndarray
    insufficient: bool = False

    def __len__(self):
        return self.prices.size


def parse_ticks(path, column_map: dict | None = None):
    """Read a tick CSV into the canonical frame, sorted by timestamp.

    Returns (ticks, n_malformed).  Malformed rows (unparsable timestamp or
    price) are dropped and counted; zero prices survive the parse stage and
    are left for cleaning.
    """
    colmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        colmap.update(column_map)
    try:
        raw = pd.read_csv(path, dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"unreadable tick file {path}: {exc}") from exc
    for key in ("timestamp", "price"):
        if colmap[key] not in raw.columns:
            raise DataError(f"missing required column {colmap[key]!r} in {path}")

    ts = _parse_timestamps(raw[colmap["timestamp"]])
    price = pd.to_numeric(raw[colmap["price"]], errors="coerce")
    ok = ts.notna() & price.notna()
    n_malformed = int((~ok).sum())
    if not ok.any():
        raise DataError(f"no parsable rows in {path}")

    out = pd.DataFrame(
        {
            "timestamp": ts[ok],
            "price": price[ok].astype(float),
            "size": pd.to_numeric(
                raw[colmap["size"]], errors="coerce"
            ).fillna(0).astype(np.int64)[ok]
            if colmap["size"] in raw.columns
            else 0,
            "exchange": raw[colmap["exchange"]][ok].fillna("")
            if colmap["exchange"] in raw.columns
            else "",
            "cond": raw[colmap["cond"]][ok].fillna("")
            if colmap["cond"] in raw.columns
            else "",
        }
    )
    out = out.sort_values("timestamp", kind="stable").reset_index(drop=True)
    return out, n_malformed


def _parse_timestamps(col: pd.Series) -> pd.Series:
    numeric = pd.to_numeric(col, errors="coerce")
    if numeric.notna().mean() > 0.5:
        return pd.to_datetime(numeric, errors="coerce")  # epoch nanoseconds
    return pd.to_datetime(col, errors="coerce", format="ISO8601")


def clean_ticks(raw: pd.DataFrame, cfg: CleaningConfig = CleaningConfig()):
    """Apply the cleaning rules in order; returns (clean, CleaningReport).

    Order: session hours, zero price, exchange, sale condition, median
    aggregation of equal timestamps, MAD outlier removal.  The MAD rule is
    iterated to a fixed point so that cleaning is idempotent.
    """
    report = CleaningReport(n_input=len(raw))
    df = raw

    tod = df["timestamp"].dt.time
    keep = (tod >= cfg.session_open) & (tod <= cfg.session_close)
    report.session_hours = int((~keep).sum())
    df = df[keep]

    keep = df["price"] > 0.0
    report.zero_price = int((~keep).sum())
    df = df[keep]

    if cfg.keep_exchange is not None:
        keep = df["exchange"] == cfg.keep_exchange
        report.exchange = int((~keep).sum())
        df = df[keep]

    if cfg.bad_condition_codes:
        keep = ~df["cond"].isin(cfg.bad_condition_codes)
        report.sale_condition = int((~keep).sum())
        df = df[keep]

    before = len(df)
    df = (
        df.groupby("timestamp", as_index=False)
        .agg(price=("price", "median"), size=("size", "sum"),
             exchange=("exchange", "first"), cond=("cond", "first"))
    )
    report.median_aggregation = before - len(df)

    df, n_mad = _mad_filter(df, cfg)
    report.mad_outlier = n_mad

    df = df.reset_index(drop=True)[TICK_COLUMNS]
    report.n_output = len(df)
    return df, report


def _mad_filter(df: pd.DataFrame, cfg: CleaningConfig):
    """Drop ticks deviating from the centered rolling median by more than
    mad_multiplier times the window-average absolute deviation.  Iterated to
    a fixed point, per calendar day."""
    window = pd.Timedelta(seconds=cfg.mad_window_seconds)
    removed = 0
    while len(df) > 0:
        s = df.set_index("timestamp")["price"]
        # group by day so windows never straddle sessions
        day = s.index.normalize()
        med = s.groupby(day).transform(
            lambda x: x.rolling(window, center=True, min_periods=1).median()
        )
        dev = (s - med).abs()
        avg_dev = dev.groupby(day).transform(
            lambda x: x.rolling(window, center=True, min_periods=1).mean()
        )
        keep = ~((avg_dev > 0.0) & (dev > cfg.mad_multiplier * avg_dev)).to_numpy()
        if keep.all():
            break
        removed += int((~keep).sum())
        df = df[keep]
    return df, removed


def to_daily_sessions(clean: pd.DataFrame,
                      min_ticks: int = DEFAULT_MIN_TICKS_PER_DAY) -> list:
    """Partition a cleaned tick frame into per-day sessions."""
    sessions = []
    if len(clean) == 0:
        return sessions
    for day, grp in clean.groupby(clean["timestamp"].dt.date, sort=True):
        sessions.append(
            DaySession(
                date=day,
                timestamps=grp["timestamp"].astype(np.int64).to_numpy(),
                prices=grp["price"].to_numpy(dtype=float),
                insufficient=len(grp) < min_ticks,
            )
        )
    return sessions
