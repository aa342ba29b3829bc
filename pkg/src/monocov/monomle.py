"""Mean and covariance estimation under monotone missingness.

The estimator factorizes the multivariate normal likelihood along the
monotone column order: the longest column contributes its sample
moments, and every following block of equal-length columns contributes
one regression on all longer columns, fitted over the block's observed
rows.  Each block regression (intercept b0, coefficient matrix B,
residual covariance V) extends the running estimate via

    mean_block = b0 + B' mean_prior
    cov[prior, block] = cov[prior, prior] B
    cov[block, block] = V + B' cov[prior, prior] B

which keeps the assembled covariance positive definite whenever every
V is.  Ordinary least squares is used only when the design has more
rows than a configurable multiple of its column count; otherwise one
of the parsimonious fitters from :mod:`monocov.regress` replaces it,
which is what makes panels with more assets than observations
estimable.

Residual covariances that are exactly singular (blocks wider than
their row count, or interpolating fits) are lifted to the smallest
positive-definite matrix above a relative eigenvalue floor so the
assembled covariance admits a Cholesky factorization.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .panel import MonotoneOrder, ReturnPanel
from .regress import (
    ALL_METHODS,
    CvSpec,
    RankDeficient,
    RegressionFit,
    Selection,
    fit_factor_parsimony,
    fit_lars_family,
    fit_ols,
    fit_pcr,
    fit_plsr,
    fit_ridge,
)

__all__ = [
    "DegenerateColumn",
    "MonomvnConfig",
    "ColumnRecord",
    "MvnEstimate",
    "estimate",
    "attach_factors",
    "extract_asset_block",
    "extract_factor_block",
]

_RANK_TOL = 1e-10


class DegenerateColumn(ValueError):
    """A column has fewer than two observed rows."""


@dataclass(frozen=True)
class MonomvnConfig:
    """Estimation settings.

    method names the parsimonious fitter used whenever least squares
    is not: one of ols, ridge, lasso, lar, stepwise, pcr, plsr,
    factor-parsimony.  parsimony_p in [0, 1] sets the switch: least
    squares runs only when the design's column count (intercept
    included) is below parsimony_p times its row count, so p=0 applies
    the parsimonious method to every block and p=1 applies it only
    when least squares is impossible.  factor_count marks how many of
    the panel's leading original columns are factors (see
    attach_factors).  mle_denominator switches variance denominators
    from n-1 to n.
    """

    method: str = "lasso"
    parsimony_p: float = 0.25
    cv: CvSpec = field(default_factory=CvSpec)
    factor_count: int = 0
    mle_denominator: bool = False

    def __post_init__(self) -> None:
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 <= self.parsimony_p <= 1.0:
            raise ValueError("parsimony_p must lie in [0, 1]")
        if self.factor_count < 0:
            raise ValueError("factor_count must be nonnegative")
        if self.method == "factor-parsimony" and self.factor_count < 1:
            raise ValueError("factor-parsimony needs at least one factor column")


@dataclass(frozen=True)
class ColumnRecord:
    """One entry of the method log: how a monotone column was handled."""

    position: int            # 1-based monotone position
    column: int              # 0-based original column index
    label: str
    n_obs: int
    design_cols: int         # predictors plus intercept
    method: str              # "moments", "ols", or the parsimonious method
    selection: Selection | None


@dataclass
class MvnEstimate:
    """Estimated mean vector and covariance matrix, in input column order."""

    mean: np.ndarray
    covariance: np.ndarray
    method_log: list[ColumnRecord] = field(default_factory=list)
    factor_block: int = 0
    labels: tuple[str, ...] = ()
    positive_definite: bool | None = None


def is_positive_definite(matrix: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(matrix)
        return True
    except np.linalg.LinAlgError:
        return False


def _sample_var(x: np.ndarray, ddof: int) -> float:
    d = x - x.mean()
    return float(d @ d / max(x.size - ddof, 1))


def _full_rank(X: np.ndarray) -> bool:
    """Numerical full column rank of the intercept-augmented design."""
    A = np.column_stack([np.ones(X.shape[0]), X])
    s = np.linalg.svd(A, compute_uv=False)
    return s.size >= A.shape[1] and s[-1] > _RANK_TOL * s[0]


def _repair_residual_cov(V: np.ndarray, response_vars: np.ndarray,
                         n_rows: int) -> np.ndarray:
    """Make an estimated residual covariance strictly positive definite.

    A block wider than its row count leaves the residual covariance
    rank deficient no matter how well each response is fitted: n rows
    support at most n - 1 independent residual directions.  When that
    happens the off-diagonal entries are not identified, so only the
    per-response residual variances are kept.  Healthy matrices pass
    through untouched; variances of exactly interpolating fits are
    floored at a negligible multiple of the response variance.
    """
    V = 0.5 * (V + V.T)
    q = V.shape[0]
    floors = np.maximum(1e-12 * response_vars, 1e-300)
    if q == 1:
        return np.array([[max(V[0, 0], floors[0])]])
    if q <= n_rows - 1:
        evals = np.linalg.eigvalsh(V)
        if evals[0] > 1e-8 * max(float(evals[-1]), 0.0):
            return V
    return np.diag(np.maximum(np.diag(V), floors))


def _fit_block(method: str, X: np.ndarray, Y: np.ndarray, config: MonomvnConfig,
               factor_design_cols: list[int], ddof: int) -> RegressionFit:
    if method == "ols":
        return fit_ols(X, Y, ddof=ddof)
    if method == "ridge":
        return fit_ridge(X, Y, cv=config.cv, ddof=ddof)
    if method in ("lasso", "lar", "stepwise"):
        return fit_lars_family(X, Y, method, cv=config.cv, ddof=ddof)
    if method == "pcr":
        return fit_pcr(X, Y, cv=config.cv, ddof=ddof)
    if method == "plsr":
        return fit_plsr(X, Y, cv=config.cv, ddof=ddof)
    if method == "factor-parsimony":
        others = [j for j in range(X.shape[1]) if j not in factor_design_cols]
        arrange = list(factor_design_cols) + others
        fit = fit_factor_parsimony(X[:, arrange], Y, len(factor_design_cols),
                                   ddof=ddof)
        beta = np.empty_like(fit.coefficients)
        beta[arrange] = fit.coefficients
        return dataclasses.replace(fit, coefficients=beta)
    raise ValueError(f"unknown method {method!r}")


def estimate(panel: ReturnPanel, order: MonotoneOrder,
             config: MonomvnConfig | None = None) -> MvnEstimate:
    """Estimate the mean vector and covariance matrix of a monotone panel.

    Results are reported in the panel's original column order.  The
    method log records, per monotone column, whether its block used
    least squares or the configured parsimonious method and which
    hyperparameter cross-validation chose.

    Raises DegenerateColumn when any column has fewer than two
    observed rows, and propagates RankDeficient only when
    config.method is "ols" and a design is singular.
    """
    config = config or MonomvnConfig()
    m = panel.n_columns
    by_position = order.columns_by_position
    values = panel.values[:, by_position]
    lengths = order.lengths
    if int(lengths[-1]) < 2:
        worst = by_position[m - 1]
        raise DegenerateColumn(
            f"column {worst + 1} ({panel.column_labels[worst]}) has fewer "
            "than two observed rows"
        )
    ddof = 0 if config.mle_denominator else 1

    factor_positions = {
        int(order.permutation[k]) for k in range(min(config.factor_count, m))
    }

    mean = np.zeros(m)
    cov = np.zeros((m, m))
    first = values[: int(lengths[0]), 0]
    mean[0] = first.mean()
    cov[0, 0] = _sample_var(first, ddof)
    log: list[ColumnRecord] = [
        ColumnRecord(
            position=1,
            column=int(by_position[0]),
            label=panel.column_labels[by_position[0]],
            n_obs=int(lengths[0]),
            design_cols=0,
            method="moments",
            selection=None,
        )
    ]

    blocks: list[tuple[int, int]] = []
    for start, stop in order.blocks:
        if start == 0:
            if stop >= 1:
                blocks.append((1, stop))
        else:
            blocks.append((start, stop))

    for start, stop in blocks:
        nb = int(lengths[start])
        width = stop - start + 1
        X = values[:nb, :start]
        Y = values[:nb, start : stop + 1]
        design_cols = start + 1
        use_ols = design_cols < config.parsimony_p * nb and _full_rank(X)
        method = "ols" if use_ols else config.method
        factor_design_cols = sorted(p for p in factor_positions if p < start)
        fit = _fit_block(method, X, Y, config, factor_design_cols, ddof)

        B = fit.coefficients
        intercept = np.atleast_1d(np.asarray(fit.intercept, dtype=float))
        V = fit.residual_covariance
        if V is None:
            V = np.array([[fit.residual_variance]])
        response_vars = np.array([_sample_var(Y[:, r], 1) for r in range(width)])
        V = _repair_residual_cov(V, response_vars, nb)

        mean[start : stop + 1] = intercept + B.T @ mean[:start]
        prior = cov[:start, :start]
        cross = prior @ B
        cov[:start, start : stop + 1] = cross
        cov[start : stop + 1, :start] = cross.T
        block_cov = V + B.T @ cross
        cov[start : stop + 1, start : stop + 1] = 0.5 * (block_cov + block_cov.T)

        selections = fit.selection
        if selections is None:
            selections = [None] * width
        elif isinstance(selections, Selection):
            selections = [selections]
        for offset in range(width):
            pos = start + offset
            orig = int(by_position[pos])
            log.append(
                ColumnRecord(
                    position=pos + 1,
                    column=orig,
                    label=panel.column_labels[orig],
                    n_obs=nb,
                    design_cols=design_cols,
                    method=method,
                    selection=selections[offset],
                )
            )

    # undo the monotone permutation for reporting
    mean_out = np.empty(m)
    mean_out[by_position] = mean
    cov_out = np.empty((m, m))
    cov_out[np.ix_(by_position, by_position)] = cov
    cov_out = 0.5 * (cov_out + cov_out.T)
    return MvnEstimate(
        mean=mean_out,
        covariance=cov_out,
        method_log=log,
        factor_block=config.factor_count,
        labels=panel.column_labels,
        positive_definite=is_positive_definite(cov_out),
    )


def attach_factors(panel: ReturnPanel, factors: ReturnPanel | None):
    """Prepend factor columns to a panel's grid.

    Returns (grid, labels, n_factors); the grid must be re-validated
    because a factor with a shorter history than some asset changes
    the monotone arrangement (positions are tracked through
    MonotoneOrder.permutation).  factors=None returns the panel
    unchanged with n_factors 0.
    """
    if factors is None:
        return panel.values.copy(), panel.column_labels, 0
    if factors.n_rows != panel.n_rows:
        raise ValueError(
            f"factor rows ({factors.n_rows}) do not match panel rows "
            f"({panel.n_rows})"
        )
    grid = np.hstack([factors.values, panel.values])
    labels = factors.column_labels + panel.column_labels
    return grid, labels, factors.n_columns


def extract_asset_block(est: MvnEstimate, n_factors: int) -> MvnEstimate:
    """Drop the leading factor columns from an augmented estimate."""
    K = int(n_factors)
    m = est.mean.shape[0]
    if not 1 <= K < m:
        raise ValueError("n_factors must lie in 1..m-1")
    if est.factor_block != K:
        raise ValueError(
            f"estimate was built with {est.factor_block} factors, not {K}"
        )
    cov = est.covariance[K:, K:].copy()
    return MvnEstimate(
        mean=est.mean[K:].copy(),
        covariance=cov,
        method_log=list(est.method_log),
        factor_block=0,
        labels=tuple(est.labels[K:]) if est.labels else (),
        positive_definite=is_positive_definite(cov),
    )


def extract_factor_block(est: MvnEstimate, n_factors: int) -> np.ndarray:
    """Covariance of the factor columns of an augmented estimate."""
    K = int(n_factors)
    if not 1 <= K <= est.mean.shape[0]:
        raise ValueError("n_factors out of range")
    return est.covariance[:K, :K].copy()
