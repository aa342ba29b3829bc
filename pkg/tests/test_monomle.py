import numpy as np
import pytest

from helpers import monotone_grid
from monocov import (
    CvSpec,
    DegenerateColumn,
    MonomvnConfig,
    RankDeficient,
    attach_factors,
    estimate,
    extract_asset_block,
    extract_factor_block,
    fit_ols,
    validate_and_order,
)

NA = np.nan

PARSIMONIOUS = ("ridge", "lasso", "lar", "stepwise", "pcr", "plsr")


def run(grid, labels=None, **cfg):
    panel, order = validate_and_order(grid, labels)
    return estimate(panel, order, MonomvnConfig(**cfg) if cfg else None)


def test_two_column_hand_example():
    # short column regresses perfectly on the long one, so the whole
    # covariance collapses onto the long column's sample variance
    grid = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, NA], [4.0, NA]])
    est = run(grid, method="ols", parsimony_p=1.0)
    np.testing.assert_allclose(est.mean, [2.5, 2.5], atol=1e-12)
    np.testing.assert_allclose(est.covariance, np.full((2, 2), 5.0 / 3.0),
                               atol=1e-12)
    assert est.positive_definite
    assert [r.method for r in est.method_log] == ["moments", "ols"]
    assert [r.n_obs for r in est.method_log] == [4, 2]
    assert [r.design_cols for r in est.method_log] == [0, 2]


def test_complete_data_equals_sample_moments_for_every_method():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 5))
    mean = X.mean(axis=0)
    cov = np.cov(X.T, ddof=1)
    for method in ("ols",) + PARSIMONIOUS + ("factor-parsimony",):
        cfg = dict(method=method, parsimony_p=1.0)
        if method == "factor-parsimony":
            cfg["factor_count"] = 1
        est = run(X.copy(), **cfg)
        np.testing.assert_allclose(est.mean, mean, atol=1e-9,
                                   err_msg=method)
        np.testing.assert_allclose(est.covariance, cov, atol=1e-9,
                                   err_msg=method)


def test_complete_data_mle_denominator():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(25, 4))
    est = run(X, method="ols", parsimony_p=1.0, mle_denominator=True)
    np.testing.assert_allclose(est.covariance, np.cov(X.T, bias=True),
                               atol=1e-11)


def test_results_are_reported_in_input_column_order():
    rng = np.random.default_rng(2)
    grid, _ = monotone_grid(rng, 5, 30, distinct=True)
    base = run(grid, method="lasso", parsimony_p=0.25)
    perm = [3, 0, 4, 1, 2]
    est = run(grid[:, perm], method="lasso", parsimony_p=0.25)
    # distinct lengths pin the monotone arrangement: identical fits run
    np.testing.assert_array_equal(est.mean, base.mean[perm])
    np.testing.assert_array_equal(est.covariance,
                                  base.covariance[np.ix_(perm, perm)])


def test_permutation_equivariance_with_tied_lengths():
    rng = np.random.default_rng(3)
    grid, _ = monotone_grid(rng, 4, 25)
    base = run(grid, method="ridge", parsimony_p=1.0)
    perm = [2, 3, 1, 0]
    est = run(grid[:, perm], method="ridge", parsimony_p=1.0)
    np.testing.assert_allclose(est.mean, base.mean[perm], atol=1e-10)
    np.testing.assert_allclose(est.covariance,
                               base.covariance[np.ix_(perm, perm)],
                               atol=1e-10)


def test_dropping_the_shortest_column_changes_nothing_else():
    rng = np.random.default_rng(4)
    grid, lengths = monotone_grid(rng, 5, 30, distinct=True)
    full = run(grid, method="lasso", parsimony_p=0.25)
    sub = run(grid[:, :4], method="lasso", parsimony_p=0.25)
    np.testing.assert_array_equal(sub.mean, full.mean[:4])
    np.testing.assert_array_equal(sub.covariance, full.covariance[:4, :4])


def test_all_zero_fit_yields_exact_zero_covariance_entries():
    rng = np.random.default_rng(5)
    grid, _ = monotone_grid(rng, 4, 60, distinct=True)
    # the last column is independent noise on its own scale
    nj = int(np.sum(~np.isnan(grid[:, 3])))
    grid[:nj, 3] = rng.normal(size=nj)
    est = run(grid, method="lasso", parsimony_p=0.0, cv=CvSpec(seed=0))
    assert est.method_log[-1].method == "lasso"
    assert (est.covariance[:3, 3] == 0.0).all()
    # its variance is then the column's own sample variance
    col = grid[:nj, 3]
    np.testing.assert_allclose(est.covariance[3, 3], np.var(col, ddof=1),
                               rtol=1e-12)


def test_method_log_follows_the_parsimony_switch():
    rng = np.random.default_rng(6)
    grid = rng.normal(size=(40, 5))
    for j, nj in enumerate([40, 30, 8, 8, 4]):
        grid[nj:, j] = NA

    est = run(grid, method="lasso", parsimony_p=0.25)
    methods = [r.method for r in est.method_log]
    # design_cols per monotone column: 0, 2, 3, 3, 5
    # rows per column: 40, 30, 8, 8, 4; least squares needs cols < 0.25*rows
    assert methods == ["moments", "ols", "lasso", "lasso", "lasso"]

    est = run(grid, method="lasso", parsimony_p=1.0)
    assert [r.method for r in est.method_log] == [
        "moments", "ols", "ols", "ols", "lasso"]

    est = run(grid, method="lasso", parsimony_p=0.0)
    assert [r.method for r in est.method_log] == [
        "moments", "lasso", "lasso", "lasso", "lasso"]


def test_parsimony_zero_never_uses_least_squares():
    rng = np.random.default_rng(7)
    grid, _ = monotone_grid(rng, 4, 50)
    est = run(grid, method="ridge", parsimony_p=0.0)
    assert all(r.method == "ridge" for r in est.method_log[1:])


def test_degenerate_column_is_rejected():
    grid = np.array([[1.0, 2.0], [2.0, NA], [3.0, NA]])
    panel, order = validate_and_order(grid)
    with pytest.raises(DegenerateColumn):
        estimate(panel, order)


def test_rank_deficient_design_only_errors_for_least_squares():
    rng = np.random.default_rng(8)
    x = rng.normal(size=30)
    grid = np.column_stack([x, x, rng.normal(size=30)])
    grid[20:, 2] = NA
    with pytest.raises(RankDeficient):
        run(grid, method="ols", parsimony_p=1.0)
    est = run(grid, method="ridge", parsimony_p=1.0)
    assert np.isfinite(est.covariance).all()


def test_wide_blocks_still_give_positive_definite_estimates():
    rng = np.random.default_rng(9)
    for method in PARSIMONIOUS:
        grid, _ = monotone_grid(rng, 12, 15)
        est = run(grid, method=method, parsimony_p=0.25, cv=CvSpec(seed=1))
        assert est.positive_definite, method
        np.linalg.cholesky(est.covariance)


def test_block_wider_than_its_rows_is_repaired():
    rng = np.random.default_rng(10)
    grid = rng.normal(size=(20, 5))
    for j, nj in enumerate([20, 3, 3, 3, 3]):
        grid[nj:, j] = NA
    est = run(grid, method="ridge", parsimony_p=0.0)
    assert est.positive_definite


def test_selection_recorded_for_tuned_methods():
    rng = np.random.default_rng(11)
    grid, _ = monotone_grid(rng, 3, 40, distinct=True)
    est = run(grid, method="lasso", parsimony_p=0.0, cv=CvSpec(seed=2))
    assert est.method_log[0].selection is None
    for rec in est.method_log[1:]:
        assert rec.selection is not None
        assert rec.selection.kind == "penalty"


def test_config_validation():
    with pytest.raises(ValueError):
        MonomvnConfig(method="kitchen-sink")
    with pytest.raises(ValueError):
        MonomvnConfig(parsimony_p=1.5)
    with pytest.raises(ValueError):
        MonomvnConfig(factor_count=-1)
    with pytest.raises(ValueError):
        MonomvnConfig(method="factor-parsimony", factor_count=0)


# ---------------------------------------------------------------------------
# factor handling


def one_factor_data(rng, m, n, k=1):
    f = rng.normal(size=(n, k))
    lam = rng.normal(size=(k, m))
    assets = f @ lam + 0.3 * rng.normal(size=(n, m))
    return f, assets


def test_attach_factors_prepends_columns():
    rng = np.random.default_rng(12)
    f, assets = one_factor_data(rng, 3, 20)
    fac_panel, _ = validate_and_order(f, labels=("mkt",))
    ast_panel, _ = validate_and_order(assets, labels=("a", "b", "c"))
    grid, labels, nf = attach_factors(ast_panel, fac_panel)
    assert nf == 1
    assert labels == ("mkt", "a", "b", "c")
    np.testing.assert_array_equal(grid[:, 0], f[:, 0])
    np.testing.assert_array_equal(grid[:, 1:], assets)


def test_attach_factors_row_mismatch_errors():
    rng = np.random.default_rng(13)
    f, assets = one_factor_data(rng, 3, 20)
    fac_panel, _ = validate_and_order(f[:10])
    ast_panel, _ = validate_and_order(assets)
    with pytest.raises(ValueError):
        attach_factors(ast_panel, fac_panel)


def test_factor_route_matches_hand_built_factor_model():
    # one complete factor, complete assets: the factor route must equal
    # loadings' outer product plus the diagonal of residual variances
    rng = np.random.default_rng(14)
    f, assets = one_factor_data(rng, 6, 80)
    grid = np.hstack([f, assets])
    est = run(grid, method="factor-parsimony", parsimony_p=0.0,
              factor_count=1)
    asset_est = extract_asset_block(est, 1)

    x = f[:, 0]
    omega = np.var(x, ddof=1)
    lam = np.empty(6)
    dd = np.empty(6)
    for i in range(6):
        fit = fit_ols(x[:, None], assets[:, i])
        lam[i] = fit.coefficients[0]
        dd[i] = fit.residual_variance
    expected = np.outer(lam, lam) * omega + np.diag(dd)

    np.testing.assert_allclose(asset_est.covariance, expected, atol=1e-8)
    np.testing.assert_allclose(asset_est.mean, assets.mean(axis=0),
                               atol=1e-10)
    np.testing.assert_allclose(extract_factor_block(est, 1), [[omega]],
                               atol=1e-12)


def test_extract_asset_block_validates_factor_count():
    rng = np.random.default_rng(15)
    f, assets = one_factor_data(rng, 4, 30)
    grid = np.hstack([f, assets])
    est = run(grid, method="factor-parsimony", parsimony_p=0.0,
              factor_count=1)
    assert est.factor_block == 1
    with pytest.raises(ValueError):
        extract_asset_block(est, 2)
    sub = extract_asset_block(est, 1)
    assert sub.factor_block == 0
    assert sub.mean.shape == (4,)
    with pytest.raises(ValueError):
        extract_asset_block(sub, 1)  # no factors left to strip


def test_shorter_factor_history_is_tracked_through_positions():
    # the factor has a shorter history than one asset, so it does not
    # occupy the first monotone position; extraction must still return
    # the asset block in asset order
    rng = np.random.default_rng(16)
    n = 40
    f = rng.normal(size=(n, 1))
    f[30:, 0] = NA
    assets = rng.normal(size=(n, 3))
    assets[20:, 2] = NA
    grid = np.hstack([f, assets])
    panel, order = validate_and_order(grid, ("mkt", "a", "b", "c"))
    est = estimate(panel, order,
                   MonomvnConfig(method="factor-parsimony", parsimony_p=0.0,
                                 factor_count=1))
    sub = extract_asset_block(est, 1)
    assert sub.labels == ("a", "b", "c")
    assert sub.covariance.shape == (3, 3)
    assert np.isfinite(sub.covariance).all()


def test_labels_travel_with_the_estimate():
    rng = np.random.default_rng(17)
    grid, _ = monotone_grid(rng, 3, 20)
    panel, order = validate_and_order(grid, ("x", "y", "z"))
    est = estimate(panel, order)
    assert est.labels == ("x", "y", "z")
