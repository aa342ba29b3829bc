import numpy as np
import pytest

from helpers import spd_matrix
from monocov import (
    BenchmarkConfig,
    NonPdCovariance,
    TruthSpec,
    complete_estimator,
    ell,
    ell_monte_carlo,
    kl_mvn,
    mvn_entropy,
    observed_estimator,
    rank_table,
    run_benchmark,
    validate_and_order,
    zero_structure,
)

NA = np.nan


# ---------------------------------------------------------------------------
# divergence and expected log-likelihood


def test_kl_of_a_distribution_with_itself_is_zero():
    rng = np.random.default_rng(0)
    for m in (1, 3, 7):
        mu = rng.normal(size=m)
        sig = spd_matrix(rng, m)
        assert abs(kl_mvn(mu, sig, mu, sig)) < 1e-12


def test_kl_mean_shift_closed_form():
    # equal unit covariances leave only the quadratic term ||d||^2/2
    d = np.array([0.3, -1.2, 0.5])
    got = kl_mvn(np.zeros(3), np.eye(3), d, np.eye(3))
    assert abs(got - d @ d / 2) < 1e-12


def test_kl_variance_ratio_closed_form():
    # KL(N(0,1) || N(0,t)) = (log t + 1/t - 1) / 2
    for t in (0.5, 2.0, 10.0):
        got = kl_mvn(np.zeros(1), np.eye(1), np.zeros(1), t * np.eye(1))
        assert abs(got - 0.5 * (np.log(t) + 1.0 / t - 1.0)) < 1e-12


def test_kl_is_asymmetric_and_nonnegative():
    rng = np.random.default_rng(1)
    mu1, sig1 = rng.normal(size=3), spd_matrix(rng, 3)
    mu2, sig2 = rng.normal(size=3), spd_matrix(rng, 3)
    a = kl_mvn(mu1, sig1, mu2, sig2)
    b = kl_mvn(mu2, sig2, mu1, sig1)
    assert a > 0 and b > 0
    assert abs(a - b) > 1e-6


def test_kl_rejects_non_positive_definite_estimate():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(NonPdCovariance):
        kl_mvn(np.zeros(2), np.eye(2), np.zeros(2), bad)


def test_entropy_closed_form():
    assert abs(mvn_entropy(4 * np.eye(1))
               - 0.5 * np.log(2 * np.pi * np.e * 4)) < 1e-12


def test_ell_decomposes_into_entropy_and_divergence():
    rng = np.random.default_rng(2)
    mu, sig = rng.normal(size=4), spd_matrix(rng, 4)
    me, se_ = rng.normal(size=4), spd_matrix(rng, 4)
    truth = TruthSpec(mean=mu, covariance=sig)
    res = ell(me, se_, truth)
    assert res.se == 0.0
    expected = -mvn_entropy(sig) - kl_mvn(mu, sig, me, se_)
    assert abs(res.value - expected) < 1e-10


def test_ell_is_maximized_at_the_truth():
    rng = np.random.default_rng(3)
    mu, sig = rng.normal(size=3), spd_matrix(rng, 3)
    truth = TruthSpec(mean=mu, covariance=sig)
    best = ell(mu, sig, truth).value
    assert abs(best + mvn_entropy(sig)) < 1e-12
    for _ in range(5):
        other = ell(mu + rng.normal(size=3), spd_matrix(rng, 3), truth).value
        assert other < best


def test_monte_carlo_ell_agrees_with_analytic():
    rng = np.random.default_rng(4)
    for seed in range(6):
        mu, sig = rng.normal(size=3), spd_matrix(rng, 3)
        me, ce = rng.normal(size=3), spd_matrix(rng, 3)
        truth = TruthSpec(mean=mu, covariance=sig, seed=seed)
        a = ell(me, ce, truth)
        m = ell_monte_carlo(me, ce, truth, draws=4000)
        assert m.se > 0
        assert abs(m.value - a.value) < 3.5 * m.se


def test_monte_carlo_ell_is_deterministic():
    truth = TruthSpec(mean=np.zeros(2), covariance=np.eye(2), seed=9)
    a = ell_monte_carlo(np.zeros(2), np.eye(2), truth, draws=500)
    b = ell_monte_carlo(np.zeros(2), np.eye(2), truth, draws=500)
    assert a.value == b.value and a.se == b.se


def test_student_truth_uses_monte_carlo():
    truth = TruthSpec(mean=np.zeros(2), covariance=np.eye(2),
                      distribution="mvt", nu=4.0, seed=1)
    res = ell(np.zeros(2), np.eye(2), truth)
    assert res.se > 0
    assert np.isfinite(res.value)


# ---------------------------------------------------------------------------
# comparator estimators


def test_complete_estimator_uses_fully_observed_rows():
    grid = np.array([
        [1.0, 1.0],
        [2.0, 2.0],
        [3.0, NA],
        [4.0, NA],
    ])
    panel, _ = validate_and_order(grid)
    est = complete_estimator(panel)
    # only the first two rows are complete
    np.testing.assert_allclose(est.mean, [1.5, 1.5], atol=1e-14)
    np.testing.assert_allclose(est.covariance, np.full((2, 2), 0.5),
                               atol=1e-14)
    est0 = complete_estimator(panel, ddof=0)
    np.testing.assert_allclose(est0.covariance, np.full((2, 2), 0.25),
                               atol=1e-14)


def test_complete_estimator_flags_rank_deficiency():
    rng = np.random.default_rng(5)
    grid = rng.normal(size=(20, 6))
    grid[3:, 5] = NA  # only 3 complete rows for 6 columns
    panel, _ = validate_and_order(grid)
    est = complete_estimator(panel)
    assert est.positive_definite is False


def test_complete_estimator_needs_two_full_rows():
    grid = np.array([[1.0, 1.0], [2.0, NA], [3.0, NA]])
    panel, _ = validate_and_order(grid)
    with pytest.raises(ValueError):
        complete_estimator(panel)


def test_observed_estimator_pairwise_hand_values():
    grid = np.array([
        [1.0, 1.0],
        [2.0, 2.0],
        [3.0, NA],
        [4.0, NA],
    ])
    panel, _ = validate_and_order(grid)
    est = observed_estimator(panel)
    np.testing.assert_allclose(est.mean, [2.5, 1.5], atol=1e-14)
    np.testing.assert_allclose(
        est.covariance, [[1.25, 0.25], [0.25, 0.25]], atol=1e-14
    )


def test_observed_estimator_can_be_indefinite():
    # the shared-row covariances are mutually inconsistent by design
    grid = np.array([
        [1.0, -1.0, 1.0],
        [-1.0, 1.0, -1.0],
        [2.0, 2.0, NA],
        [-2.0, -2.0, NA],
    ])
    panel, _ = validate_and_order(grid)
    est = observed_estimator(panel)
    np.testing.assert_allclose(
        est.covariance,
        [[2.5, 1.5, 1.0], [1.5, 2.5, -1.0], [1.0, -1.0, 1.0]],
        atol=1e-14,
    )
    assert est.positive_definite is False
    assert np.linalg.eigvalsh(est.covariance).min() < 0


def test_observed_estimator_needs_shared_rows():
    grid = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, NA]])
    grid[1, 1] = 2.0
    panel, _ = validate_and_order(grid)
    est = observed_estimator(panel)  # fine: two shared rows
    grid2 = np.array([[1.0, 1.0], [2.0, NA], [3.0, NA]])
    panel2, _ = validate_and_order(grid2)
    with pytest.raises(ValueError):
        observed_estimator(panel2)


# ---------------------------------------------------------------------------
# ranking and sparsity reports


def test_rank_table_orders_and_averages_ties():
    scores = np.array([
        [3.0, 1.0, 2.0],
        [-np.inf, -np.inf, 5.0],
    ])
    expected = np.array([
        [1.0, 3.0, 2.0],
        [2.5, 2.5, 1.0],
    ])
    np.testing.assert_array_equal(rank_table(scores), expected)


def test_rank_equivalence_of_ell_and_negative_kl():
    rng = np.random.default_rng(6)
    mu, sig = rng.normal(size=3), spd_matrix(rng, 3)
    truth = TruthSpec(mean=mu, covariance=sig)
    ells, kls = [], []
    for _ in range(5):
        me, ce = rng.normal(size=3), spd_matrix(rng, 3)
        ells.append(ell(me, ce, truth).value)
        kls.append(kl_mvn(mu, sig, me, ce))
    a = rank_table(np.array([ells]))
    b = rank_table(-np.array([kls]))
    np.testing.assert_array_equal(a, b)


def test_zero_structure_counts_block_pattern():
    cov = np.array([
        [1.0, 0.5, 0.0],
        [0.5, 1.0, 0.0],
        [0.0, 0.0, 2.0],
    ])
    zs = zero_structure(cov)
    assert zs.n_columns == 3
    assert zs.n_offdiag_pairs == 3
    assert zs.covariance_zeros == 2
    assert zs.precision_zeros == 2
    assert zs.covariance_zero_fraction == pytest.approx(2 / 3)
    assert zs.precision_zero_fraction == pytest.approx(2 / 3)
    assert zs.zeros_by_column == (1, 1, 2)


def test_zero_structure_dense_matrix_reports_none():
    rng = np.random.default_rng(7)
    zs = zero_structure(spd_matrix(rng, 4))
    assert zs.covariance_zeros == 0


def test_zero_structure_requires_positive_definite_input():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NonPdCovariance):
        zero_structure(bad)


# ---------------------------------------------------------------------------
# benchmark harness


def test_benchmark_smoke_and_determinism():
    cfg = BenchmarkConfig(m=6, n=40, trials=3, methods=("lasso",),
                          parsimony=(0.0, 1.0), seed=3)
    res = run_benchmark(cfg)
    assert res.estimators == [
        "complete", "observed", "lasso(p=0)", "lasso(p=1)"]
    assert res.ell.shape == (3, 4)
    assert res.ranks.shape == (3, 4)
    np.testing.assert_array_equal(res.ranks, rank_table(res.ell))
    for row in res.ranks:
        assert row.sum() == pytest.approx(4 * 5 / 2)
    res2 = run_benchmark(cfg)
    np.testing.assert_array_equal(res.ell, res2.ell)
    np.testing.assert_array_equal(res.ranks, res2.ranks)


def test_benchmark_penalizes_non_positive_definite_comparators():
    # more columns than complete rows forces the comparators under
    cfg = BenchmarkConfig(m=10, n=12, trials=2, methods=("ridge",),
                          parsimony=(0.0,), seed=1)
    res = run_benchmark(cfg)
    bad = ~res.pd_flags
    assert bad[:, :2].any()  # at least one comparator fails
    assert (res.ell[bad] == -np.inf).all()
    assert (res.kl[bad] == np.inf).all()
    good = res.pd_flags
    assert np.isfinite(res.ell[good]).all()


def test_benchmark_student_truth_reports_standard_errors():
    cfg = BenchmarkConfig(m=4, n=30, trials=2, methods=("lasso",),
                          parsimony=(1.0,), distribution="mvt",
                          mc_draws=2000, seed=2)
    res = run_benchmark(cfg)
    # no analytic divergence under a Student truth; the infinite
    # penalty for non-positive-definite estimates still applies
    assert np.isnan(res.kl[res.pd_flags]).all()
    assert (res.kl[~res.pd_flags] == np.inf).all()
    finite = np.isfinite(res.ell)
    assert (res.ell_se[finite] > 0).all()
