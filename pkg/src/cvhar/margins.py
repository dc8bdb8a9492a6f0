"""Marginal CDF models for the volatility components: rescaled ECDF,
log-domain Gaussian-kernel CDF, and Inverse-Gaussian MLE fits, plus the
probability-integral transform that feeds the copula estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from cvhar.errors import DataError, DomainError, FitError

MARGIN_KINDS = ("ecdf", "kernel", "inverse_gaussian")

# CDF clamp for parametric / kernel margins: PIT output never touches {0, 1}.
CDF_EPS = 1e-10

DEFAULT_MIN_SAMPLE = 30


@dataclass(frozen=True)
class Margin:
    """A fitted univariate CDF on the positive reals.

    kind 'ecdf'  stores the sorted sample; cdf is the rank/(n+1) rescaling.
    kind 'kernel' stores the log sample and a Silverman bandwidth.
    kind 'inverse_gaussian' stores (mu, lam) from the closed-form MLE.
    """

    kind: str
    sample: np.ndarray | None = None
    bandwidth: float = float("nan")
    mu: float = float("nan")
    lam: float = float("nan")

    def cdf(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise DomainError("margin cdf requires x > 0")
        if self.kind == "ecdf":
            n = self.sample.size
            out = np.searchsorted(self.sample, x, side="right") / (n + 1.0)
            out = np.clip(out, 1.0 / (n + 1.0), n / (n + 1.0))
        elif self.kind == "kernel":
            logs = np.log(self.sample)
            z = (np.log(x)[..., None] - logs) / self.bandwidth
            out = np.clip(stats.norm.cdf(z).mean(axis=-1), CDF_EPS, 1.0 - CDF_EPS)
        else:
            dist = stats.invgauss(self.mu / self.lam, scale=self.lam)
            out = np.clip(dist.cdf(x), CDF_EPS, 1.0 - CDF_EPS)
        return float(out) if scalar else out

    def quantile(self, p):
        scalar = np.ndim(p) == 0
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise DomainError("quantile requires p in (0, 1)")
        if self.kind == "ecdf":
            n = self.sample.size
            idx = np.clip(np.ceil(p * (n + 1.0)).astype(int) - 1, 0, n - 1)
            out = self.sample[idx]
        elif self.kind == "kernel":
            out = self._invert_cdf(p)
        else:
            dist = stats.invgauss(self.mu / self.lam, scale=self.lam)
            out = dist.ppf(p)
        return float(out) if scalar else out

    def _invert_cdf(self, p):
        # bracket in log space around the sample, widen for extreme p
        lo = float(np.min(self.sample)) * math.exp(-12.0 * self.bandwidth)
        hi = float(np.max(self.sample)) * math.exp(12.0 * self.bandwidth)
        flat = np.atleast_1d(p)
        out = np.empty(flat.shape)
        for i, pi in enumerate(flat):
            out[i] = optimize.brentq(lambda x: self.cdf(x) - pi, lo, hi, xtol=1e-14)
        return out.reshape(np.shape(p))

    def mean(self) -> float:
        if self.kind == "ecdf":
            return float(np.mean(self.sample))
        if self.kind == "inverse_gaussian":
            return self.mu
        # lognormal-kernel mixture mean: mean of s_i * exp(bw^2 / 2)
        return float(np.mean(self.sample) * math.exp(self.bandwidth**2 / 2.0))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("ecdf", "kernel"):
            d["sample"] = self.sample.tolist()
        if self.kind == "kernel":
            d["bandwidth"] = self.bandwidth
        if self.kind == "inverse_gaussian":
            d["mu"] = self.mu
            d["lam"] = self.lam
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Margin":
        kind = d["kind"]
        if kind == "ecdf":
            return cls(kind=kind, sample=np.asarray(d["sample"], dtype=float))
        if kind == "kernel":
            return cls(
                kind=kind,
                sample=np.asarray(d["sample"], dtype=float),
                bandwidth=float(d["bandwidth"]),
            )
        return cls(kind=kind, mu=float(d["mu"]), lam=float(d["lam"]))


def silverman_bandwidth(log_sample: np.ndarray) -> float:
    n = log_sample.size
    sd = float(np.std(log_sample, ddof=1))
    iqr = float(np.subtract(*np.percentile(log_sample, [75, 25])))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def fit_margin(sample, kind: str, min_sample: int = DEFAULT_MIN_SAMPLE,
               bandwidth: float | None = None) -> Margin:
    """Fit one of the three margin models on a positive sample."""
    if kind not in MARGIN_KINDS:
        raise DomainError(f"unknown margin kind: {kind!r}")
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 1:
        raise DataError("sample must be one-dimensional")
    if sample.size < min_sample:
        raise DataError(f"need at least {min_sample} observations, got {sample.size}")
    if np.any(sample <= 0.0) or not np.all(np.isfinite(sample)):
        raise DataError("sample must be positive and finite")
    if kind == "ecdf":
        return Margin(kind="ecdf", sample=np.sort(sample))
    if np.ptp(sample) == 0.0:
        raise FitError("degenerate sample (all values equal)")
    if kind == "kernel":
        srt = np.sort(sample)
        bw = float(bandwidth) if bandwidth is not None else silverman_bandwidth(np.log(srt))
        if bw <= 0.0:
            raise FitError("non-positive kernel bandwidth")
        return Margin(kind="kernel", sample=srt, bandwidth=bw)
    # inverse_gaussian closed-form MLE
    mu = float(np.mean(sample))
    denom = float(np.sum(1.0 / sample - 1.0 / mu))
    if denom <= 0.0:
        raise FitError("degenerate sample for inverse-Gaussian MLE")
    lam = sample.size / denom
    return Margin(kind="inverse_gaussian", mu=mu, lam=lam)


def pit_transform(columns, margins) -> np.ndarray:
    """Map each data column through its margin CDF into (0, 1).

    columns: sequence of equal-length positive arrays, ordered
    (monthly, weekly, daily, target); margins: one Margin per column.
    """
    if len(columns) != len(margins):
        raise DataError(
            f"dimension mismatch: {len(columns)} columns vs {len(margins)} margins"
        )
    cols = [np.asarray(c, dtype=float) for c in columns]
    lengths = {c.size for c in cols}
    if len(lengths) > 1:
        raise DataError("columns must share one length")
    n = lengths.pop() if lengths else 0
    if n == 0:
        return np.empty((0, len(cols)))
    return np.column_stack([m.cdf(c) for c, m in zip(cols, margins)])
