"""Mean and covariance estimation for panels with monotone missingness.

The package estimates the mean vector and covariance matrix of a
multivariate normal panel whose columns have unequal history lengths,
swapping ordinary least squares for parsimonious regressions (ridge,
lasso, least-angle, stepwise, principal components, partial least
squares, or a factor layout) whenever a column's design is too wide
for its rows.  Around the estimator sit synthetic data generation,
distribution scoring, and long-only minimum-variance portfolio tools,
all reachable from the ``monocov`` command line as well.
"""

from .evaluate import (
    BenchmarkConfig,
    BenchmarkResult,
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
    zero_structure,
)
from .monomle import (
    DegenerateColumn,
    MonomvnConfig,
    MvnEstimate,
    attach_factors,
    estimate,
    extract_asset_block,
    extract_factor_block,
)
from .panel import (
    EmptyColumn,
    MonotoneOrder,
    NonFiniteValue,
    NonMonotonePattern,
    PanelError,
    PanelFormatError,
    ReturnPanel,
    read_panel,
    validate_and_order,
    write_panel,
)
from .portfolio import (
    BacktestConfig,
    BacktestReport,
    ConvergenceError,
    PortfolioWeights,
    backtest,
    buy_and_hold,
    kkt_residuals,
    min_variance,
    performance_stats,
)
from .regress import (
    CvSpec,
    RankDeficient,
    RegressionFit,
    Selection,
    cross_validate,
    fit_factor_parsimony,
    fit_lars_family,
    fit_ols,
    fit_pcr,
    fit_plsr,
    fit_ridge,
    lars_path,
)
from .simulate import SimSpec, TrialData, generate_trial, rand_mvn_params, rmono, sample

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BacktestConfig",
    "BacktestReport",
    "BenchmarkConfig",
    "BenchmarkResult",
    "ConvergenceError",
    "CvSpec",
    "DegenerateColumn",
    "EmptyColumn",
    "MonomvnConfig",
    "MonotoneOrder",
    "MvnEstimate",
    "NonFiniteValue",
    "NonMonotonePattern",
    "NonPdCovariance",
    "PanelError",
    "PanelFormatError",
    "PortfolioWeights",
    "RankDeficient",
    "RegressionFit",
    "ReturnPanel",
    "Selection",
    "SimSpec",
    "TrialData",
    "TruthSpec",
    "attach_factors",
    "backtest",
    "buy_and_hold",
    "complete_estimator",
    "cross_validate",
    "ell",
    "ell_monte_carlo",
    "estimate",
    "extract_asset_block",
    "extract_factor_block",
    "fit_factor_parsimony",
    "fit_lars_family",
    "fit_ols",
    "fit_pcr",
    "fit_plsr",
    "fit_ridge",
    "generate_trial",
    "kkt_residuals",
    "kl_mvn",
    "lars_path",
    "min_variance",
    "mvn_entropy",
    "observed_estimator",
    "performance_stats",
    "rand_mvn_params",
    "rank_table",
    "read_panel",
    "rmono",
    "run_benchmark",
    "sample",
    "validate_and_order",
    "write_panel",
    "zero_structure",
]
