import numpy as np
import pandas as pd
import pytest

from cvhar.errors import DataError, FitError
from cvhar.har import HarModel, fit_har, har_forecast


def synthetic_components(n=300, coef=(1e-5, 0.4, 0.3, 0.2), noise=2e-5,
                         seed=0):
    rng = np.random.default_rng(seed)
    rk_d = rng.gamma(2.0, 1e-4, n)
    rk_w = pd.Series(rk_d).rolling(5, min_periods=1).mean().to_numpy()
    rk_m = pd.Series(rk_d).rolling(22, min_periods=1).mean().to_numpy()
    c, bd, bw, bm = coef
    target = c + bd * rk_d + bw * rk_w + bm * rk_m + rng.normal(0, noise, n)
    return pd.DataFrame({"rk_d": rk_d, "rk_w": rk_w, "rk_m": rk_m,
                         "target": target})


class TestFit:
    def test_recovers_coefficients(self):
        comp = synthetic_components(n=5000, noise=1e-6)
        m = fit_har(comp)
        assert m.intercept == pytest.approx(1e-5, abs=5e-7)
        assert m.beta_d == pytest.approx(0.4, abs=0.02)
        assert m.beta_w == pytest.approx(0.3, abs=0.05)
        assert m.beta_m == pytest.approx(0.2, abs=0.05)

    def test_matches_normal_equations(self):
        comp = synthetic_components(n=400, seed=3)
        m = fit_har(comp)
        X = np.column_stack([np.ones(len(comp)), comp["rk_d"], comp["rk_w"],
                             comp["rk_m"]])
        y = comp["target"].to_numpy()
        ref = np.linalg.solve(X.T @ X, X.T @ y)
        assert m.coefficients == pytest.approx(ref, rel=1e-9)

    def test_rank_deficient(self):
        comp = synthetic_components(n=100)
        comp["rk_w"] = comp["rk_d"] * 2.0
        with pytest.raises(FitError):
            fit_har(comp)

    def test_constant_series_rank_deficient(self):
        comp = pd.DataFrame({"rk_d": np.ones(100), "rk_w": np.ones(100),
                             "rk_m": np.ones(100), "target": np.ones(100)})
        with pytest.raises(FitError):
            fit_har(comp)

    def test_too_short(self):
        with pytest.raises(DataError):
            fit_har(synthetic_components(n=10))

    def test_missing_column(self):
        comp = synthetic_components(n=100).drop(columns="rk_m")
        with pytest.raises(DataError):
            fit_har(comp)

    def test_nonfinite(self):
        comp = synthetic_components(n=100)
        comp.loc[5, "target"] = np.nan
        with pytest.raises(DataError):
            fit_har(comp)


class TestForecast:
    def test_linear_combination(self):
        m = HarModel(intercept=1.0, beta_d=2.0, beta_w=3.0, beta_m=4.0,
                     n_obs=100, residual_variance=0.1)
        value, negative = har_forecast(m, 1.0, 1.0, 1.0)
        assert value == pytest.approx(10.0)
        assert not negative

    def test_negative_flagged_not_truncated(self):
        m = HarModel(intercept=-1.0, beta_d=0.0, beta_w=0.0, beta_m=0.0,
                     n_obs=100, residual_variance=0.1)
        value, negative = har_forecast(m, 1.0, 1.0, 1.0)
        assert value == -1.0 and negative

    def test_serialization_roundtrip(self):
        comp = synthetic_components(n=200, seed=5)
        m = fit_har(comp)
        assert HarModel.from_dict(m.to_dict()) == m
