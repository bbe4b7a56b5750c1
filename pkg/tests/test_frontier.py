import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from greenfolio import DEFAULT_RISK_FREE
from greenfolio.errors import DataValidationError, NumericalError
from greenfolio.frontier import (
    DEFAULT_INITIAL_VALUE,
    DEFAULT_SAMPLE_COUNT,
    PortfolioSample,
    backtest,
    build_hull,
    evaluate_samples,
    green_excess_return,
    green_sharpe,
    make_samples,
    optimal_index,
    portfolio_metrics,
    sample_weights,
    select_optimal,
)
from greenfolio.ingest import AssetRecord, MarketSeries

M2 = [0.10, 0.20]
C2 = np.diag([0.04, 0.09])
ES2 = [50.0, 60.0]


def random_problem(rng, n):
    a = rng.normal(size=(n, n))
    return rng.uniform(-0.05, 0.3, n), a @ a.T / n * 0.05, rng.uniform(0, 100, n)


class TestSampleWeights:
    def test_single_asset(self):
        assert sample_weights(1, 1, seed=3).tolist() == [[1.0]]

    def test_deterministic(self):
        assert np.array_equal(sample_weights(3, 5, seed=11), sample_weights(3, 5, seed=11))
        assert not np.array_equal(sample_weights(3, 5, seed=11), sample_weights(3, 5, seed=12))

    def test_default_count(self):
        assert DEFAULT_SAMPLE_COUNT == 20_000
        assert sample_weights(4, seed=0).shape == (20_000, 4)

    def test_normalised_uniform_recipe(self):
        raw = 1.0 - np.random.default_rng(5).random((10, 3))
        np.testing.assert_array_equal(sample_weights(3, 10, seed=5),
                                      raw / raw.sum(axis=1, keepdims=True))

    @pytest.mark.parametrize("method", ["normalized", "dirichlet"])
    def test_simplex(self, method):
        w = sample_weights(6, 2000, seed=1, method=method)
        assert np.all(w >= 0)
        assert np.max(np.abs(w.sum(axis=1) - 1)) < 1e-12

    def test_dirichlet_differs_from_normalized(self):
        # flat Dirichlet spreads further into the corners of the simplex
        a = sample_weights(5, 20000, seed=2, method="normalized")
        b = sample_weights(5, 20000, seed=2, method="dirichlet")
        assert b.max(axis=1).mean() > a.max(axis=1).mean()

    @pytest.mark.parametrize("args", [(0, 5), (3, 0)])
    def test_invalid(self, args):
        with pytest.raises(DataValidationError):
            sample_weights(*args, seed=0)

    def test_unknown_method(self):
        with pytest.raises(DataValidationError):
            sample_weights(2, 2, seed=0, method="sobol")


class TestPortfolioMetrics:
    def test_single_asset_identity(self):
        mu, sigma, es = portfolio_metrics([1, 0], M2, C2, ES2)
        assert (mu, sigma, es) == pytest.approx((0.10, 0.20, 50.0), abs=1e-15)

    def test_equal_weights(self):
        # sqrt(0.25 * 0.04 + 0.25 * 0.09) = sqrt(0.0325)
        mu, sigma, es = portfolio_metrics([0.5, 0.5], M2, C2, ES2)
        assert mu == pytest.approx(0.15, abs=1e-15)
        assert sigma == pytest.approx(0.180278, abs=1e-6)
        assert es == pytest.approx(55.0, abs=1e-12)

    def test_matches_double_loop(self, rng):
        m, c, es = random_problem(rng, 3)
        w = sample_weights(3, 1, seed=4)[0]
        got = portfolio_metrics(w, m, c, es)
        want = oracles.metrics_double_loop(w.tolist(), m.tolist(), c.tolist(), es.tolist())
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_vectorised_agrees(self, rng):
        m, c, es = random_problem(rng, 5)
        w = sample_weights(5, 50, seed=8)
        mu, sigma, score = evaluate_samples(w, m, c, es)
        for i in range(50):
            np.testing.assert_allclose((mu[i], sigma[i], score[i]),
                                       portfolio_metrics(w[i], m, c, es), rtol=1e-14, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DataValidationError, match="dimension"):
            portfolio_metrics([1.0], M2, C2, ES2)

    def test_not_psd(self):
        with pytest.raises(NumericalError):
            portfolio_metrics([0.5, 0.5], M2, [[0.01, -0.5], [-0.5, 0.01]], ES2)

    def test_homogeneous_in_mean_and_es_independent(self, rng):
        m, c, es = random_problem(rng, 4)
        w = sample_weights(4, 1, seed=9)[0]
        mu, _, score = portfolio_metrics(w, m, c, es)
        mu3, _, score3 = portfolio_metrics(w, 3 * m, 2 * c, es)
        assert mu3 == pytest.approx(3 * mu, rel=1e-14)
        assert score3 == score


class TestScores:
    def test_green_excess_zero(self):
        assert green_excess_return(DEFAULT_RISK_FREE, 55) == 0.0

    def test_green_excess_value(self):
        # 0.0805 * 55
        assert green_excess_return(0.15, 55, 0.0695) == pytest.approx(4.4275, abs=1e-12)

    def test_default_risk_free(self):
        assert DEFAULT_RISK_FREE == 0.0695

    def test_green_sharpe_zero(self):
        assert green_sharpe(0.0695, 0.2, 60, 0.0695) == 0.0

    def test_green_sharpe_value(self):
        assert green_sharpe(0.15, 0.180278, 55, 0.0695) == pytest.approx(24.559, abs=1e-3)

    def test_zero_sigma(self):
        with pytest.raises(NumericalError):
            green_sharpe(0.1, 0.0, 50)


def sample(mu, sigma, es, n=2, index=None):
    return PortfolioSample(np.full(n, 1.0 / n), mu, sigma, es, index)


class TestSelectOptimal:
    def test_single(self):
        s = sample(0.1, 0.2, 50)
        assert select_optimal([s]) is s

    def test_tie_goes_to_lower_sigma(self):
        # both score exactly (0.75 - 0.25) / sigma * es = 50 in binary floating point
        a = sample(0.75, 0.5, 50.0)
        b = sample(0.75, 0.25, 25.0)
        assert select_optimal([a, b], r_f=0.25) is b
        assert select_optimal([b, a], r_f=0.25) is b

    def test_full_tie_goes_to_lower_index(self):
        a, b = sample(0.2, 0.2, 50), sample(0.2, 0.2, 50)
        assert select_optimal([a, b]) is a

    def test_matches_exhaustive_scan(self, rng):
        m, c, es = random_problem(rng, 6)
        samples = make_samples(sample_weights(6, 1000, seed=21), m, c, es)
        want = oracles.exhaustive_argmax([s.mu for s in samples], [s.sigma for s in samples],
                                         [s.es for s in samples], 0.0695)
        assert select_optimal(samples, 0.0695).index == want

    def test_permutation_invariant(self, rng):
        m, c, es = random_problem(rng, 4)
        samples = make_samples(sample_weights(4, 300, seed=5), m, c, es)
        best = select_optimal(samples)
        shuffled = [samples[i] for i in rng.permutation(len(samples))]
        assert select_optimal(shuffled) is best

    def test_empty(self):
        with pytest.raises(DataValidationError):
            select_optimal([])

    def test_zero_sigma_rejected(self):
        with pytest.raises(NumericalError):
            optimal_index([0.1, 0.2], [0.1, 0.0], [50, 50])


class TestPortfolioSample:
    def test_rejects_short(self):
        with pytest.raises(DataValidationError):
            PortfolioSample([1.5, -0.5], 0.1, 0.2, 50)

    def test_rejects_unnormalised(self):
        with pytest.raises(DataValidationError):
            PortfolioSample([0.5, 0.6], 0.1, 0.2, 50)

    def test_rejects_bad_es(self):
        with pytest.raises(DataValidationError):
            PortfolioSample([1.0], 0.1, 0.2, 101)


TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
CUBE = np.array(list(itertools.product([0.0, 1.0], repeat=3)))


class TestHull:
    def test_tetrahedron(self):
        h = build_hull(TETRA)
        assert sorted(h.vertices) == [0, 1, 2, 3]
        assert len(h.facets) == 4

    def test_cube_with_centroid(self):
        pts = np.vstack([CUBE, [[0.5, 0.5, 0.5]]])
        h = build_hull(pts)
        assert sorted(h.vertices) == list(range(8))
        assert 8 not in h.vertices
        assert h.contains(pts).all()

    def test_random_containment(self, rng):
        pts = np.column_stack([rng.uniform(0, 0.3, 500), rng.uniform(0.1, 0.4, 500),
                               rng.uniform(40, 80, 500)])
        h = build_hull(pts)
        assert oracles.max_facet_violation(pts, h.facets, pts) <= 1e-9
        assert h.contains(pts).all()

    def test_outward_normals(self, rng):
        pts = rng.normal(size=(60, 3)) * [0.05, 0.05, 10] + [0.15, 0.2, 60]
        h = build_hull(pts)
        outside = pts[h.vertices] + 2 * (pts[h.vertices] - pts.mean(axis=0))
        assert not h.contains(outside).any()
        for f, n in zip(h.facets, h.normals):
            a, b, c = pts[f]
            assert np.cross(b - a, c - a) @ n > 0

    def test_vertices_match_brute_force(self, rng):
        pts = rng.uniform(size=(20, 3)) * [0.3, 0.3, 60]
        h = build_hull(pts)
        assert set(h.vertices.tolist()) == oracles.brute_force_hull_vertices(pts)

    def test_portfolio_cloud(self, rng):
        m, c, es = random_problem(rng, 5)
        mu, sigma, score = evaluate_samples(sample_weights(5, 3000, seed=1), m, c, es)
        pts = np.column_stack([mu, sigma, score])
        h = build_hull(pts)
        assert oracles.max_facet_violation(pts, h.facets, pts) <= 1e-9

    def test_accepts_samples(self):
        samples = [PortfolioSample([1.0], *p) for p in
                   [(0.1, 0.1, 10), (0.2, 0.1, 10), (0.1, 0.2, 10), (0.1, 0.1, 20)]]
        assert len(build_hull(samples).facets) == 4

    def test_too_few(self):
        with pytest.raises(DataValidationError):
            build_hull(TETRA[:3])

    def test_coplanar(self):
        pts = np.column_stack([np.arange(6.0), np.arange(6.0) ** 2, np.ones(6)])
        with pytest.raises(NumericalError):
            build_hull(pts)
        tilted = np.column_stack([CUBE[:, 0], CUBE[:, 1], CUBE[:, 0] + CUBE[:, 1]])
        with pytest.raises(NumericalError, match="coplanar"):
            build_hull(tilted)

    def test_to_dict(self):
        d = build_hull(TETRA).to_dict()
        assert set(d) == {"vertices", "facets", "normals", "offsets"}
        assert len(d["facets"]) == 4 and all(len(f) == 3 for f in d["facets"])


def make_assets():
    return [
        AssetRecord("A", "a", "large", 50, {2000: 10.0, 2001: 20.0, 2002: 15.0}),
        AssetRecord("B", "b", "mid", 70, {2000: 4.0, 2001: 4.0, 2002: 5.0}),
    ]


class TestBacktest:
    def test_default_initial_value(self):
        assert DEFAULT_INITIAL_VALUE == 100.0

    def test_single_asset_doubling(self):
        a = AssetRecord("A", "a", "large", 50, {2000: 10.0, 2001: 20.0})
        res = backtest([1.0], [a], (2000, 2001))
        assert [s.value for s in res.snapshots] == [100.0, 200.0]
        assert res.returns == {2001: 1.0}

    def test_buy_and_hold(self):
        res = backtest([0.5, 0.5], make_assets(), (2000, 2002), 100.0)
        np.testing.assert_allclose(res.snapshots[0].units, [5.0, 12.5])
        # 5 * 15 + 12.5 * 5
        assert res.values == pytest.approx({2000: 100.0, 2001: 150.0, 2002: 137.5})
        assert res.returns[2002] == pytest.approx(137.5 / 150 - 1)

    def test_first_value_exact(self, rng):
        w = sample_weights(2, 1, seed=3)[0]
        res = backtest(w, make_assets(), (2000, 2002), 123.456)
        assert res.snapshots[0].value == 123.456

    def test_weights_recovered(self):
        res = backtest([0.3, 0.7], make_assets(), (2000, 2002))
        for snap in res.snapshots:
            assert snap.value == pytest.approx(float(snap.units @ snap.prices), rel=1e-9)
            assert snap.weights().sum() == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(res.snapshots[0].weights(), [0.3, 0.7], atol=1e-12)
        # holding the year-2001 units from 2001 onwards reproduces 2001's weights
        snap = res.snapshots[1]
        again = backtest(snap.weights(), make_assets(), (2001, 2002), snap.value)
        np.testing.assert_allclose(again.snapshots[0].units, snap.units, rtol=1e-12)
        np.testing.assert_allclose(again.snapshots[-1].value, res.snapshots[-1].value, rtol=1e-12)

    def test_market_returns(self):
        market = MarketSeries({2000: 100.0, 2001: 110.0, 2002: 99.0})
        res = backtest([0.5, 0.5], make_assets(), (2000, 2002), market=market)
        assert res.market_returns == pytest.approx({2001: 0.1, 2002: -0.1})

    def test_missing_year(self):
        with pytest.raises(DataValidationError, match="missing years"):
            backtest([0.5, 0.5], make_assets(), (1999, 2002))

    def test_bad_inputs(self):
        with pytest.raises(DataValidationError):
            backtest([1.0], make_assets(), (2000, 2002))
        with pytest.raises(DataValidationError):
            backtest([0.5, 0.5], make_assets(), (2000, 2002), initial_value=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_sampled_weights_always_on_simplex(n, count, seed):
    w = sample_weights(n, count, seed=seed)
    assert w.shape == (count, n)
    assert np.all(w >= 0)
    assert np.all(np.abs(w.sum(axis=1) - 1) < 1e-12)
