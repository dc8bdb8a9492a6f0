"""Daily realized variance and realized-kernel estimation, and construction
of the daily/weekly/monthly component series used by both forecast models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date

import numpy as np
import pandas as pd

from cvhar.errors import DataError, DomainError

# Bandwidth constant for the Parzen kernel: ((12)^2 / 0.269)^(1/5).
PARZEN_CSTAR = (144.0 / 0.269) ** 0.2

WEEKLY_DAYS = 5
MONTHLY_DAYS = 22

COMPONENT_COLUMNS = ["date", "rk_d", "rk_w", "rk_m", "target"]


@dataclass(frozen=True)
class RkEstimate:
    date: Date
    rk: float
    bandwidth_h: int
    n_returns: int


def realized_variance(log_prices) -> float:
    """Sum of squared consecutive log-returns."""
    p = np.asarray(log_prices, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DataError("need at least 2 prices")
    r = np.diff(p)
    return float(np.dot(r, r))


def parzen_weight(x):
    """Parzen kernel on [0, 1]: 1 - 6x^2 + 6x^3 below 1/2, 2(1-x)^3 above."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("parzen weight defined on [0, 1]")
    out = np.where(x <= 0.5, 1.0 - 6.0 * x**2 + 6.0 * x**3, 2.0 * (1.0 - x) ** 3)
    return float(out) if scalar else out


def _session_log_prices(session):
    p = np.asarray(session.prices, dtype=float)
    if np.any(p <= 0.0):
        raise DataError("session contains non-positive prices")
    return np.log(p)


def select_bandwidth(session, sparse_seconds: float = 1200.0,
                     noise_variance: float | None = None,
                     signal_variance: float | None = None) -> int:
    """Optimal Parzen bandwidth H* = ceil(c* xi^(4/5) n^(3/5)).

    xi^2 = noise variance / signal variance, with the noise estimated from
    the dense-grid RV divided by 2n and the signal from a sparse-grid
    (default 20-minute) RV.  Both estimates can be overridden.
    """
    ticks = np.asarray(session.prices, dtype=float)
    if ticks.size < 4:
        raise DataError("too few ticks to estimate the noise variance")
    logp = _session_log_prices(session)
    n = logp.size - 1
    rv_dense = realized_variance(logp)
    omega2 = rv_dense / (2.0 * n) if noise_variance is None else float(noise_variance)
    if signal_variance is None:
        sig = _sparse_rv(session.timestamps, logp, sparse_seconds)
        if sig <= 0.0:
            sig = rv_dense
    else:
        sig = float(signal_variance)
    if omega2 <= 0.0 or sig <= 0.0:
        return 0
    xi2 = omega2 / sig
    return int(math.ceil(PARZEN_CSTAR * xi2**0.4 * n**0.6))


def _sparse_rv(timestamps, logp, spacing_seconds):
    """Previous-tick RV on a regular calendar grid."""
    ts = np.asarray(timestamps, dtype=np.int64)
    step = int(spacing_seconds * 1e9)
    grid = np.arange(ts[0], ts[-1] + step, step)
    idx = np.searchsorted(ts, grid, side="right") - 1
    sampled = logp[np.clip(idx, 0, logp.size - 1)]
    if sampled.size < 2:
        return 0.0
    r = np.diff(sampled)
    return float(np.dot(r, r))


def realized_kernel(session, H: int) -> RkEstimate:
    """Non-flat-top Parzen realized kernel over tick-by-tick log-returns:
    RK = sum_{h=-H..H} k(|h|/(H+1)) gamma_h, gamma_h = sum_j r_j r_{j-|h|}."""
    if H < 0:
        raise DomainError("bandwidth H must be non-negative")
    logp = _session_log_prices(session)
    r = np.diff(logp)
    n = r.size
    if n < H + 1:  # gamma_H needs at least one cross product
        raise DataError(f"need at least {H + 1} returns for H={H}, got {n}")
    rk = float(np.dot(r, r))  # gamma_0, weight k(0) = 1
    for h in range(1, H + 1):
        gamma = float(np.dot(r[h:], r[:-h]))
        rk += 2.0 * float(parzen_weight(h / (H + 1.0))) * gamma
    return RkEstimate(date=session.date, rk=rk, bandwidth_h=H, n_returns=n)


def build_components(rk_series) -> pd.DataFrame:
    """Aligned (rk_d, rk_w, rk_m, target) rows with the 22-day burn-in dropped.

    Row at day t carries the day-t RK, the means over the last 5 and 22
    available trading days, and the day-(t+1) RK as the forecast target.
    """
    rks = list(rk_series)
    if len(rks) < MONTHLY_DAYS + 1:
        raise DataError(f"need at least {MONTHLY_DAYS + 1} daily RK values, got {len(rks)}")
    values = np.array([e.rk for e in rks], dtype=float)
    dates = [e.date for e in rks]
    rows = []
    for t in range(MONTHLY_DAYS - 1, len(rks) - 1):
        rows.append(
            {
                "date": dates[t],
                "rk_d": values[t],
                "rk_w": float(np.mean(values[t - WEEKLY_DAYS + 1 : t + 1])),
                "rk_m": float(np.mean(values[t - MONTHLY_DAYS + 1 : t + 1])),
                "target": values[t + 1],
            }
        )
    return pd.DataFrame(rows, columns=COMPONENT_COLUMNS)


def rk_series_to_csv(rk_series, path) -> None:
    pd.DataFrame(
        {
            "date": [e.date for e in rk_series],
            "rk": [e.rk for e in rk_series],
            "bandwidth": [e.bandwidth_h for e in rk_series],
            "n_returns": [e.n_returns for e in rk_series],
        }
    ).to_csv(path, index=False)


def rk_series_from_csv(path) -> list:
    df = pd.read_csv(path, parse_dates=["date"])
    return [
        RkEstimate(
            date=row.date.date(),
            rk=float(row.rk),
            bandwidth_h=int(row.bandwidth),
            n_returns=int(row.n_returns),
        )
        for row in df.itertuples()
    ]


def components_to_csv(components: pd.DataFrame, path) -> None:
    components.to_csv(path, index=False)


def components_from_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, parse_dates=["date"])
    missing = set(COMPONENT_COLUMNS) - set(df.columns)
    if missing:
        raise DataError(f"component CSV missing columns: {sorted(missing)}")
    df["date"] = df["date"].dt.date
    return df[COMPONENT_COLUMNS]
