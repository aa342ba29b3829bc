import numpy as np
import pytest

from helpers import spd_matrix
from monocov import (
    BacktestConfig,
    ConvergenceError,
    backtest,
    buy_and_hold,
    kkt_residuals,
    min_variance,
    performance_stats,
)
from monocov.portfolio import parse_estimator_token


# ---------------------------------------------------------------------------
# the long-only quadratic program


def test_identity_covariance_gives_equal_weights():
    res = min_variance(np.eye(5))
    np.testing.assert_allclose(res.weights, np.full(5, 0.2), atol=1e-12)
    assert res.objective == pytest.approx(0.2)
    assert res.active_count == 5


def test_diagonal_covariance_weights_by_inverse_variance():
    d = np.array([1.0, 2.0, 4.0])
    res = min_variance(np.diag(d))
    expected = (1 / d) / (1 / d).sum()
    np.testing.assert_allclose(res.weights, expected, atol=1e-12)


def test_unconstrained_closed_form():
    rng = np.random.default_rng(0)
    sigma = spd_matrix(rng, 4)
    res = min_variance(sigma, no_short=False)
    ones = np.ones(4)
    w = np.linalg.solve(sigma, ones)
    w /= ones @ w
    np.testing.assert_allclose(res.weights, w, atol=1e-10)


def test_long_only_weights_are_a_distribution():
    rng = np.random.default_rng(1)
    for seed in range(20):
        sigma = spd_matrix(np.random.default_rng(seed), 6)
        res = min_variance(sigma)
        assert res.weights.min() >= 0
        assert abs(res.weights.sum() - 1) < 1e-12


def test_long_only_objective_dominates_unconstrained():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        sigma = spd_matrix(rng, 5)
        free = min_variance(sigma, no_short=False)
        long_only = min_variance(sigma)
        assert long_only.objective >= free.objective - 1e-12


def test_kkt_residuals_vanish_at_the_solution():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 12))
        sigma = spd_matrix(rng, m)
        res = min_variance(sigma)
        kkt = kkt_residuals(sigma, res.weights)
        assert set(kkt) == {"budget", "negativity", "dual", "complementarity"}
        assert max(kkt.values()) < 1e-8, (seed, kkt)


def test_kkt_residuals_flag_a_bad_point():
    sigma = np.diag([1.0, 100.0])
    kkt = kkt_residuals(sigma, np.array([0.5, 0.5]))
    assert kkt["complementarity"] > 1e-3


def test_two_asset_solutions_match_a_brute_force_grid():
    # includes a high-correlation pair whose unconstrained solution
    # shorts the riskier asset, pinning the long-only weight at a corner
    cases = [spd_matrix(np.random.default_rng(s), 2) for s in range(10)]
    cases.append(np.array([[0.04, 0.054], [0.054, 0.09]]))
    grid = np.linspace(0.0, 1.0, 100001)
    for sigma in cases:
        var = (
            grid**2 * sigma[0, 0]
            + 2 * grid * (1 - grid) * sigma[0, 1]
            + (1 - grid) ** 2 * sigma[1, 1]
        )
        best = grid[np.argmin(var)]
        res = min_variance(sigma)
        assert abs(res.weights[0] - best) < 1e-4


def test_corner_solution_is_exact():
    sigma = np.array([[0.04, 0.054], [0.054, 0.09]])
    res = min_variance(sigma)
    np.testing.assert_allclose(res.weights, [1.0, 0.0], atol=1e-12)
    assert res.active_count == 1


def test_weights_are_scale_invariant():
    rng = np.random.default_rng(3)
    sigma = spd_matrix(rng, 5)
    a = min_variance(sigma)
    b = min_variance(1e-4 * sigma)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-9)


def test_single_asset_portfolio():
    res = min_variance(np.array([[2.0]]))
    np.testing.assert_array_equal(res.weights, [1.0])


def test_indefinite_covariance_is_rejected():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ConvergenceError):
        min_variance(bad, no_short=False)


# ---------------------------------------------------------------------------
# drift and performance summaries


def test_buy_and_hold_drift():
    w = buy_and_hold(np.array([0.5, 0.5]), np.array([0.1, -0.2]))
    np.testing.assert_allclose(w, [0.55 / 0.95, 0.40 / 0.95], atol=1e-14)


def test_buy_and_hold_rejects_total_loss():
    with pytest.raises(ValueError):
        buy_and_hold(np.array([1.0]), np.array([-1.0]))


def test_performance_stats_hand_values():
    r = np.array([0.02, 0.00, 0.04])
    s = performance_stats(r, rf=0.01, periods_per_year=12)
    assert s.n_periods == 3
    assert s.mean == pytest.approx(0.01)
    assert s.sd == pytest.approx(0.02)
    assert s.sharpe == pytest.approx(0.01 / 0.02 * np.sqrt(12))
    assert s.annualized_mean == pytest.approx(0.12)
    assert s.annualized_sd == pytest.approx(0.02 * np.sqrt(12))
    assert np.isnan(s.tracking_error)


def test_performance_stats_market_diagnostics():
    r = np.array([0.02, 0.00, 0.04, -0.01])
    mkt = np.array([0.01, 0.01, 0.03, 0.00])
    s = performance_stats(r, market=mkt, periods_per_year=12)
    assert s.tracking_error == pytest.approx(
        np.std(r - mkt, ddof=1) * np.sqrt(12))
    assert s.market_correlation == pytest.approx(np.corrcoef(r, mkt)[0, 1])


def test_performance_stats_zero_volatility_sentinel():
    flat = np.full(5, 0.01)
    assert performance_stats(flat, rf=0.0).sharpe == np.inf
    assert performance_stats(-flat, rf=0.0).sharpe == -np.inf
    assert performance_stats(np.zeros(5), rf=0.0).sharpe == 0.0


def test_performance_stats_rf_series():
    r = np.array([0.02, 0.03, 0.01])
    rf = np.array([0.01, 0.01, 0.02])
    s = performance_stats(r, rf=rf)
    assert s.mean == pytest.approx((r - rf).mean())


# ---------------------------------------------------------------------------
# estimator tokens and the rolling backtest


def test_estimator_tokens():
    assert parse_estimator_token("equal") == ("equal", None)
    assert parse_estimator_token("complete") == ("complete", None)
    assert parse_estimator_token("observed") == ("observed", None)
    assert parse_estimator_token("lasso") == ("model", "lasso")
    assert parse_estimator_token("f+pcr") == ("factor", "pcr")
    with pytest.raises(ValueError):
        parse_estimator_token("sharpe-max")
    with pytest.raises(ValueError):
        parse_estimator_token("f+bogus")


def synthetic_market_panel(seed, T=90, n=5):
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.5, 1.5, size=n)
    mkt = 0.01 + 0.03 * rng.standard_normal(T)
    idio = 0.02 * rng.standard_normal((T, n))
    R = np.outer(mkt, beta) + idio
    return R, mkt


def test_backtest_smoke():
    R, mkt = synthetic_market_panel(0)
    labels = tuple(f"a{j}" for j in range(5))
    cfg = BacktestConfig(estimators=("equal", "lasso", "f+factor-parsimony"),
                         paths=2, window=40, min_history=10, rebalance=12,
                         seed=1)
    report = backtest(R, labels, cfg, market=mkt, rf=0.001)
    assert report.estimators == ["equal", "lasso", "f+factor-parsimony"]
    assert len(report.path_stats) == 2 * 3
    for ps in report.path_stats:
        assert ps.stats.n_periods >= 2
        assert np.isfinite(ps.stats.sd)
        assert ps.failures >= 0
    sharpe = report.metric_matrix("sharpe")
    assert sharpe.shape == (2, 3)
    assert np.isfinite(sharpe).all()


def test_backtest_is_deterministic():
    R, mkt = synthetic_market_panel(1)
    labels = tuple(f"a{j}" for j in range(5))
    cfg = BacktestConfig(estimators=("equal", "ridge"), paths=2, window=40,
                         min_history=10, rebalance=12, seed=7)
    a = backtest(R, labels, cfg, market=mkt)
    b = backtest(R, labels, cfg, market=mkt)
    np.testing.assert_array_equal(a.metric_matrix("mean"),
                                  b.metric_matrix("mean"))
    np.testing.assert_array_equal(a.metric_matrix("sharpe"),
                                  b.metric_matrix("sharpe"))


def test_backtest_respects_listing_gaps():
    # an asset that lists late is excluded until it has enough history
    R, mkt = synthetic_market_panel(2)
    R[:55, 4] = np.nan  # appears at t=55, after the first rebalances
    labels = tuple(f"a{j}" for j in range(5))
    cfg = BacktestConfig(estimators=("equal",), paths=1, window=40,
                         min_history=10, rebalance=12, seed=0)
    report = backtest(R, labels, cfg, market=mkt)
    assert report.path_stats[0].stats.n_periods >= 2


def test_backtest_subsamples_assets_without_replacement():
    R, mkt = synthetic_market_panel(3, n=8)
    labels = tuple(f"a{j}" for j in range(8))
    cfg = BacktestConfig(estimators=("equal",), paths=3, n_assets=4,
                         window=40, min_history=10, rebalance=12, seed=2)
    report = backtest(R, labels, cfg)
    assert len(report.path_stats) == 3


def test_backtest_rejects_short_panels():
    R, _ = synthetic_market_panel(4, T=30)
    with pytest.raises(ValueError):
        backtest(R, tuple("abcde"), BacktestConfig(window=40))
