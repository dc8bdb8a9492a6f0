import numpy as np
import pytest
from scipy import stats

from cvhar.copulas import PairCopula
from cvhar.errors import DataError
from cvhar.vine import (
    EDGES,
    CVineModel,
    conditional_cdf,
    conditional_expectation,
    fit_cvine,
    simulate_cvine,
)


def pc(family, theta=()):
    if not isinstance(theta, tuple):
        theta = (theta,)
    return PairCopula(family=family, theta=theta, fit_loglik=0.0, fit_aic=0.0)


def vine(edge_map):
    return CVineModel(pair_copulas={e: pc(*edge_map.get(e, ("independence",)))
                                    for e in EDGES},
                      family_set="AGT", total_loglik=0.0)


class NormalMargin:
    """Duck-typed margin used as a closed-form oracle."""

    kind = "oracle"

    def __init__(self, mu=0.0, sd=1.0):
        self.mu, self.sd = mu, sd

    def cdf(self, x):
        return np.clip(stats.norm.cdf(x, self.mu, self.sd), 1e-12, 1 - 1e-12)

    def quantile(self, p):
        return stats.norm.ppf(p, self.mu, self.sd)

    def mean(self):
        return self.mu


INDEP = vine({})
NORMAL_MARGINS = [NormalMargin(10.0, 1.0)] * 4


class TestFit:
    def test_independent_data(self):
        rng = np.random.default_rng(0)
        u = rng.uniform(size=(3000, 4))
        model = fit_cvine(u, "A")
        assert abs(model.total_loglik) < 15.0

    def test_roundtrip_gaussian(self):
        rho = {"12": 0.5, "13": 0.4, "14": 0.6, "23|1": 0.3, "24|1": 0.2,
               "34|12": 0.25}
        truth = vine({e: ("gaussian", r) for e, r in rho.items()})
        u = simulate_cvine(truth, 5000, seed=1)
        model = fit_cvine(u, "AGT")
        for e in EDGES:
            # student_t with large dof is statistically indistinguishable
            assert model.edge(e).family in ("gaussian", "student_t")
            assert model.edge(e).theta[0] == pytest.approx(rho[e], abs=0.05)

    def test_agt_loglik_at_least_a(self):
        truth = vine({"12": ("gaussian", 0.6), "34|12": ("clayton", 1.5)})
        u = simulate_cvine(truth, 1500, seed=2)
        assert (fit_cvine(u, "AGT").total_loglik
                >= fit_cvine(u, "A").total_loglik - 1e-9)

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            fit_cvine(np.random.default_rng(3).uniform(size=(10, 4)), "A")

    def test_wrong_shape(self):
        with pytest.raises(DataError):
            fit_cvine(np.random.default_rng(4).uniform(size=(100, 3)), "A")

    def test_unknown_family_set(self):
        with pytest.raises(DataError):
            fit_cvine(np.random.default_rng(5).uniform(size=(100, 4)), "B")

    def test_independence_prefilter(self):
        rng = np.random.default_rng(6)
        u = rng.uniform(size=(500, 4))
        model = fit_cvine(u, "AGT", independence_alpha=0.001)
        indep = [model.edge(e).family == "independence" for e in EDGES]
        assert sum(indep) >= 5  # nearly all edges screened out

    def test_total_loglik_is_sum(self):
        truth = vine({"12": ("frank", 4.0)})
        u = simulate_cvine(truth, 800, seed=7)
        model = fit_cvine(u, "A")
        assert model.total_loglik == pytest.approx(
            sum(model.edge(e).fit_loglik for e in EDGES))


class TestConditionalCdf:
    def test_independence_collapses_to_margin(self):
        x4 = 10.7
        F = conditional_cdf(INDEP, NORMAL_MARGINS, x4, (9.0, 11.0, 10.2))
        assert F == pytest.approx(stats.norm.cdf(0.7), rel=1e-9)

    def test_partial_independence_reduces_to_first_edge(self):
        # only edge 14 active: F(x4|x) = h_14(u4|u1)
        from cvhar.copulas import h_function
        model = vine({"14": ("clayton", 2.0)})
        x4, cond = 10.3, (9.5, 11.0, 10.0)
        F = conditional_cdf(model, NORMAL_MARGINS, x4, cond)
        u1 = float(NORMAL_MARGINS[0].cdf(np.array([cond[0]]))[0])
        u4 = float(NORMAL_MARGINS[3].cdf(np.array([x4]))[0])
        ref = float(h_function(pc("clayton", 2.0), u4, u1))
        assert F == pytest.approx(ref, rel=1e-10)

    def test_monotone_with_limits(self):
        model = vine({"12": ("gumbel", 2.0), "14": ("frank", 4.0),
                      "24|1": ("clayton", 1.0)})
        grid = np.linspace(5.0, 15.0, 50)
        F = np.array([conditional_cdf(model, NORMAL_MARGINS, x,
                                      (10.0, 10.0, 10.0)) for x in grid])
        assert np.all(np.diff(F) >= -1e-12)
        assert F[0] < 1e-4 and F[-1] > 1 - 1e-4


class TestConditionalExpectation:
    def test_independence_gives_unconditional_mean(self):
        E = conditional_expectation(INDEP, NORMAL_MARGINS, (8.0, 12.0, 10.0))
        assert E == pytest.approx(10.0, rel=1e-5)

    def test_positive_dependence_shifts_mean(self):
        model = vine({"14": ("gumbel", 3.0)})
        E_low = conditional_expectation(model, NORMAL_MARGINS, (8.0, 10.0, 10.0))
        E_high = conditional_expectation(model, NORMAL_MARGINS, (12.0, 10.0, 10.0))
        assert E_low < 10.0 < E_high

    def test_full_output_reports_tail(self):
        E, info = conditional_expectation(INDEP, NORMAL_MARGINS,
                                          (10.0, 10.0, 10.0),
                                          full_output=True)
        assert info["tail_integrand"] < 1e-5
        assert info["upper_limit"] > 14.0

    def test_ecdf_margin_exact_path(self):
        from cvhar.margins import fit_margin
        rng = np.random.default_rng(8)
        x = rng.gamma(2.0, 1.0, 400)
        m = fit_margin(x, "ecdf")
        margins = [m, m, m, m]
        E = conditional_expectation(INDEP, margins, (1.0, 1.0, 1.0))
        # vacuous conditioning: integral of 1 - cdf over the step grid,
        # including the clamped level below the smallest observation
        s = np.sort(x)
        edges = np.concatenate([[0.0], s])
        levels = m.cdf((edges[:-1] + edges[1:]) / 2.0)
        ref = float(np.dot(1.0 - levels, np.diff(edges)))
        assert E == pytest.approx(ref, rel=1e-10)


class TestSimulate:
    def test_independence_uncorrelated(self):
        u = simulate_cvine(INDEP, 100000, seed=9)
        for i in range(4):
            for j in range(i + 1, 4):
                tau, _ = stats.kendalltau(u[:5000, i], u[:5000, j])
                assert abs(tau) < 0.03

    def test_clayton_edge_tau(self):
        model = vine({"12": ("clayton", 2.0)})
        u = simulate_cvine(model, 100000, seed=10)
        tau, _ = stats.kendalltau(u[:20000, 0], u[:20000, 1])
        assert tau == pytest.approx(0.5, abs=0.02)

    def test_deterministic(self):
        model = vine({"12": ("gumbel", 2.0), "34|12": ("frank", 3.0)})
        a = simulate_cvine(model, 1000, seed=11)
        b = simulate_cvine(model, 1000, seed=11)
        np.testing.assert_array_equal(a, b)

    def test_bad_n(self):
        with pytest.raises(DataError):
            simulate_cvine(INDEP, 0, seed=0)


class TestSerialization:
    def test_roundtrip(self):
        model = vine({"12": ("gaussian", 0.3), "24|1": ("student_t",
                                                        (0.4, 6.0))})
        back = CVineModel.from_dict(model.to_dict())
        assert back == model

    def test_missing_edge_rejected(self):
        copulas = {e: pc("independence") for e in EDGES[:-1]}
        with pytest.raises(DataError):
            CVineModel(pair_copulas=copulas, family_set="A", total_loglik=0.0)
