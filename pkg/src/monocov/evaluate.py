"""Scoring estimated distributions against simulation truth.

Estimates are scored by the expected log likelihood (ELL) a fitted
normal assigns to fresh data from the truth, and by the matching
Kullback-Leibler divergence.  For a normal truth both have closed
forms and rank estimators identically (their sum is a constant of the
truth); for a Student-t truth the ELL is integrated by Monte Carlo and
reported with a standard error.

Two textbook comparators are included: the complete-data estimator
(moments of the fully observed rows) and the observed-data estimator
(per-entry moments over whatever rows each column pair shares).  The
first wastes most of the panel; the second is not guaranteed positive
semidefinite.  Estimates without a Cholesky factorization score
-inf ELL / +inf KL in benchmarks so they rank behind every proper
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import rankdata

from . import simulate
from .monomle import MonomvnConfig, MvnEstimate, estimate, is_positive_definite
from .panel import ReturnPanel
from .regress import ALL_METHODS, CvSpec

__all__ = [
    "NonPdCovariance",
    "TruthSpec",
    "EllResult",
    "kl_mvn",
    "mvn_entropy",
    "ell",
    "ell_monte_carlo",
    "complete_estimator",
    "observed_estimator",
    "rank_table",
    "ZeroStructure",
    "zero_structure",
    "BenchmarkConfig",
    "BenchmarkResult",
    "run_benchmark",
    "COMPARATOR_TOKENS",
]

_SALT_SCORE = 5

COMPARATOR_TOKENS = ("complete", "observed")


class NonPdCovariance(ValueError):
    """A covariance matrix has no Cholesky factorization."""


@dataclass(frozen=True)
class TruthSpec:
    """The data-generating distribution used for scoring.

    mc_draws and seed only matter when the truth is Student-t (or when
    Monte Carlo integration is requested explicitly).
    """

    mean: np.ndarray
    covariance: np.ndarray
    distribution: str = "mvn"
    nu: float | None = None
    mc_draws: int = 10000
    seed: int = 0


@dataclass(frozen=True)
class EllResult:
    value: float
    se: float


def _chol(cov: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(np.asarray(cov, dtype=float))
    except np.linalg.LinAlgError:
        raise NonPdCovariance(f"{what} covariance is not positive definite")


def mvn_entropy(cov: np.ndarray) -> float:
    """Differential entropy of a normal with the given covariance."""
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise NonPdCovariance("entropy needs a positive definite covariance")
    return 0.5 * (m * np.log(2.0 * np.pi * np.e) + logdet)


def kl_mvn(mean_true: np.ndarray, cov_true: np.ndarray,
           mean_est: np.ndarray, cov_est: np.ndarray) -> float:
    """KL divergence from the true normal to the estimated normal."""
    mean_true = np.asarray(mean_true, dtype=float)
    mean_est = np.asarray(mean_est, dtype=float)
    m = mean_true.shape[0]
    Lq = _chol(cov_est, "estimated")
    Lp = _chol(cov_true, "true")
    # tr(Q^-1 P) via triangular solves against the Cholesky factors
    S = solve_triangular(Lq, Lp, lower=True)
    trace = float(np.sum(S * S))
    delta = solve_triangular(Lq, mean_est - mean_true, lower=True)
    quad = float(delta @ delta)
    logdet_ratio = 2.0 * (
        float(np.sum(np.log(np.diag(Lq)))) - float(np.sum(np.log(np.diag(Lp))))
    )
    return 0.5 * (logdet_ratio + trace + quad - m)


def _mvn_loglik(X: np.ndarray, mean: np.ndarray, L: np.ndarray) -> np.ndarray:
    m = mean.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    Z = solve_triangular(L, (X - mean).T, lower=True)
    quad = np.sum(Z * Z, axis=0)
    return -0.5 * (m * np.log(2.0 * np.pi) + logdet + quad)


def ell(mean_est: np.ndarray, cov_est: np.ndarray, truth: TruthSpec) -> EllResult:
    """Expected log likelihood of the estimate under the truth.

    Closed form for a normal truth; Monte Carlo with a standard error
    otherwise.  Raises NonPdCovariance when the estimate cannot score
    a density.
    """
    if truth.distribution == "mvn":
        _chol(cov_est, "estimated")
        value = -mvn_entropy(truth.covariance) - kl_mvn(
            truth.mean, truth.covariance, mean_est, cov_est
        )
        return EllResult(value=value, se=0.0)
    return ell_monte_carlo(mean_est, cov_est, truth)


def ell_monte_carlo(mean_est: np.ndarray, cov_est: np.ndarray,
                    truth: TruthSpec, draws: int | None = None) -> EllResult:
    """Monte Carlo estimate of the expected log likelihood."""
    n = int(draws if draws is not None else truth.mc_draws)
    if n < 2:
        raise ValueError("need at least two Monte Carlo draws")
    L = _chol(cov_est, "estimated")
    rng = np.random.default_rng(np.random.SeedSequence((truth.seed, _SALT_SCORE)))
    X = simulate.sample(truth.mean, truth.covariance, n,
                        distribution=truth.distribution, nu=truth.nu, rng=rng)
    mean_est = np.asarray(mean_est, dtype=float)
    ll = _mvn_loglik(X, mean_est, L)
    return EllResult(value=float(ll.mean()),
                     se=float(ll.std(ddof=1) / np.sqrt(n)))


def complete_estimator(panel: ReturnPanel, ddof: int = 1) -> MvnEstimate:
    """Sample moments of the rows where every column is observed."""
    values = panel.values
    full_rows = ~np.isnan(values).any(axis=1)
    n_full = int(full_rows.sum())
    if n_full < 2:
        raise ValueError("fewer than two fully observed rows")
    X = values[full_rows]
    mean = X.mean(axis=0)
    D = X - mean
    cov = D.T @ D / max(n_full - ddof, 1)
    return MvnEstimate(
        mean=mean,
        covariance=cov,
        labels=panel.column_labels,
        positive_definite=is_positive_definite(cov),
    )


def observed_estimator(panel: ReturnPanel) -> MvnEstimate:
    """Pairwise available-case moments.

    Each covariance entry averages cross products over the rows the
    pair shares, centered by the pair's own means, with the shared row
    count as denominator.  The assembled matrix need not be positive
    semidefinite; the reported mean uses each column's full history.
    """
    values = panel.values
    m = values.shape[1]
    observed = ~np.isnan(values)
    mean = np.empty(m)
    for j in range(m):
        col = values[observed[:, j], j]
        if col.size < 2:
            raise ValueError(f"column {j + 1} has fewer than two observations")
        mean[j] = col.mean()
    cov = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            both = observed[:, i] & observed[:, j]
            n_pair = int(both.sum())
            if n_pair < 2:
                raise ValueError(
                    f"columns {i + 1} and {j + 1} share fewer than two rows"
                )
            xi = values[both, i]
            xj = values[both, j]
            cov[i, j] = cov[j, i] = float(
                (xi - xi.mean()) @ (xj - xj.mean()) / n_pair
            )
    return MvnEstimate(
        mean=mean,
        covariance=cov,
        labels=panel.column_labels,
        positive_definite=is_positive_definite(cov),
    )


def rank_table(scores: np.ndarray) -> np.ndarray:
    """Per-trial ranks of estimator scores, 1 = best, ties averaged.

    scores has one row per trial and one column per estimator; higher
    is better.
    """
    scores = np.asarray(scores, dtype=float)
    return np.vstack([rankdata(-row, method="average") for row in scores])


@dataclass(frozen=True)
class ZeroStructure:
    """Sparsity summary of a covariance estimate."""

    n_columns: int
    n_offdiag_pairs: int
    covariance_zeros: int          # exact zeros among off-diagonal pairs
    precision_zeros: int           # |entry| below tol * max|entry| in the inverse
    covariance_zero_fraction: float
    precision_zero_fraction: float
    zeros_by_column: tuple[int, ...]


def zero_structure(cov: np.ndarray, tol: float = 1e-8) -> ZeroStructure:
    """Count exact zeros in a covariance and near-zeros in its inverse."""
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0]
    off = ~np.eye(m, dtype=bool)
    upper = np.triu(off)
    n_pairs = int(upper.sum())
    cov_zero_mask = (cov == 0.0) & off
    cov_zeros = int((cov_zero_mask & upper).sum())
    L = _chol(cov, "analyzed")
    inv = solve_triangular(L, np.eye(m), lower=True)
    precision = inv.T @ inv
    scale = float(np.max(np.abs(precision)))
    prec_zeros = int(((np.abs(precision) < tol * scale) & upper).sum())
    return ZeroStructure(
        n_columns=m,
        n_offdiag_pairs=n_pairs,
        covariance_zeros=cov_zeros,
        precision_zeros=prec_zeros,
        covariance_zero_fraction=cov_zeros / n_pairs if n_pairs else 0.0,
        precision_zero_fraction=prec_zeros / n_pairs if n_pairs else 0.0,
        zeros_by_column=tuple(int(c) for c in cov_zero_mask.sum(axis=0)),
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    """Settings for a simulation benchmark.

    Each trial generates one panel, fits every requested estimator,
    and scores the results against the trial's truth.  methods crossed
    with parsimony give the model-based estimators; the complete and
    observed comparators join once each when included.
    """

    m: int = 25
    n: int = 150
    trials: int = 30
    methods: tuple[str, ...] = ("lasso",)
    parsimony: tuple[float, ...] = (0.25,)
    include_complete: bool = True
    include_observed: bool = True
    distribution: str = "mvn"
    nu: float | None = None
    mc_draws: int = 10000
    seed: int = 0
    cv: CvSpec = field(default_factory=CvSpec)
    mle_denominator: bool = False

    def __post_init__(self) -> None:
        for method in self.methods:
            if method not in ALL_METHODS:
                raise ValueError(f"unknown method {method!r}")
        for p in self.parsimony:
            if not 0.0 <= p <= 1.0:
                raise ValueError("parsimony values must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("need at least one trial")

    def estimator_names(self) -> list[str]:
        names = []
        if self.include_complete:
            names.append("complete")
        if self.include_observed:
            names.append("observed")
        for method in self.methods:
            for p in self.parsimony:
                names.append(f"{method}(p={p:g})")
        return names


@dataclass
class BenchmarkResult:
    """Scores and ranks from a benchmark run, one row per trial."""

    config: BenchmarkConfig
    estimators: list[str]
    ell: np.ndarray         # trials x estimators
    ell_se: np.ndarray
    kl: np.ndarray          # NaN when the truth is not normal
    ranks: np.ndarray       # by ELL, 1 = best
    pd_flags: np.ndarray    # bool, trials x estimators

    @property
    def median_ranks(self) -> np.ndarray:
        return np.median(self.ranks, axis=0)

    def rows(self) -> list[dict]:
        out = []
        for t in range(self.ell.shape[0]):
            for e, name in enumerate(self.estimators):
                out.append({
                    "trial": t,
                    "estimator": name,
                    "ell": self.ell[t, e],
                    "ell_se": self.ell_se[t, e],
                    "kl": self.kl[t, e],
                    "rank": self.ranks[t, e],
                    "positive_definite": bool(self.pd_flags[t, e]),
                })
        return out


def _score(est: MvnEstimate, truth: TruthSpec) -> tuple[float, float, float, bool]:
    """(ell, se, kl, pd) with infinite penalties for non-PD estimates."""
    try:
        res = ell(est.mean, est.covariance, truth)
    except NonPdCovariance:
        return -np.inf, 0.0, np.inf, False
    if truth.distribution == "mvn":
        kl = kl_mvn(truth.mean, truth.covariance, est.mean, est.covariance)
    else:
        kl = np.nan
    return res.value, res.se, kl, True


def run_benchmark(config: BenchmarkConfig) -> BenchmarkResult:
    """Generate panels, fit every estimator, and score each trial."""
    names = config.estimator_names()
    n_est = len(names)
    trial_seeds = np.random.SeedSequence(config.seed).generate_state(config.trials)
    ell_mat = np.empty((config.trials, n_est))
    se_mat = np.zeros((config.trials, n_est))
    kl_mat = np.full((config.trials, n_est), np.nan)
    pd_mat = np.zeros((config.trials, n_est), dtype=bool)

    for t in range(config.trials):
        trial_seed = int(trial_seeds[t])
        trial = simulate.generate_trial(simulate.SimSpec(
            m=config.m, n=config.n, distribution=config.distribution,
            nu=config.nu, seed=trial_seed,
        ))
        truth = TruthSpec(
            mean=trial.mean, covariance=trial.covariance,
            distribution=config.distribution, nu=trial.nu,
            mc_draws=config.mc_draws, seed=trial_seed,
        )
        col = 0
        if config.include_complete:
            est = complete_estimator(trial.panel,
                                     ddof=0 if config.mle_denominator else 1)
            ell_mat[t, col], se_mat[t, col], kl_mat[t, col], pd_mat[t, col] = \
                _score(est, truth)
            col += 1
        if config.include_observed:
            est = observed_estimator(trial.panel)
            ell_mat[t, col], se_mat[t, col], kl_mat[t, col], pd_mat[t, col] = \
                _score(est, truth)
            col += 1
        for method in config.methods:
            for p in config.parsimony:
                est = estimate(trial.panel, trial.order, MonomvnConfig(
                    method=method, parsimony_p=p, cv=config.cv,
                    mle_denominator=config.mle_denominator,
                ))
                ell_mat[t, col], se_mat[t, col], kl_mat[t, col], pd_mat[t, col] = \
                    _score(est, truth)
                col += 1

    return BenchmarkResult(
        config=config,
        estimators=names,
        ell=ell_mat,
        ell_se=se_mat,
        kl=kl_mat,
        ranks=rank_table(ell_mat),
        pd_flags=pd_mat,
    )
