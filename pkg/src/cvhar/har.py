"""Linear model of next-day realized variance on its daily, weekly and
monthly trailing components, fit by ordinary least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from cvhar.errors import DataError, FitError

REGRESSORS = ["rk_d", "rk_w", "rk_m"]

MIN_FIT_ROWS = 30


@dataclass(frozen=True)
class HarModel:
    intercept: float
    beta_d: float
    beta_w: float
    beta_m: float
    n_obs: int
    residual_variance: float

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.intercept, self.beta_d, self.beta_w, self.beta_m])

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "beta_d": self.beta_d,
            "beta_w": self.beta_w,
            "beta_m": self.beta_m,
            "n_obs": self.n_obs,
            "residual_variance": self.residual_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HarModel":
        return cls(**{k: d[k] for k in (
            "intercept", "beta_d", "beta_w", "beta_m", "n_obs",
            "residual_variance")})


def fit_har(components: pd.DataFrame) -> HarModel:
    """OLS of target on [1, rk_d, rk_w, rk_m] via lstsq."""
    for col in REGRESSORS + ["target"]:
        if col not in components.columns:
            raise DataError(f"components frame missing column {col!r}")
    n = len(components)
    if n < MIN_FIT_ROWS:
        raise DataError(f"need at least {MIN_FIT_ROWS} rows to fit, got {n}")
    X = np.column_stack([np.ones(n)] + [
        components[c].to_numpy(dtype=float) for c in REGRESSORS])
    y = components["target"].to_numpy(dtype=float)
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DataError("non-finite values in regression data")
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise FitError("rank-deficient design matrix (collinear regressors)")
    resid = y - X @ coef
    dof = n - X.shape[1]
    return HarModel(
        intercept=float(coef[0]),
        beta_d=float(coef[1]),
        beta_w=float(coef[2]),
        beta_m=float(coef[3]),
        n_obs=n,
        residual_variance=float(resid @ resid / dof),
    )


def har_forecast(model: HarModel, rk_d: float, rk_w: float, rk_m: float):
    """One-step forecast; returns (value, negative_flag).

    The linear model can produce a negative variance forecast; it is
    reported as-is with the flag set rather than truncated.
    """
    value = (model.intercept + model.beta_d * rk_d
             + model.beta_w * rk_w + model.beta_m * rk_m)
    return float(value), bool(value < 0.0)
