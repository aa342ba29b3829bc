"""Minimum-variance portfolios and a rolling backtest.

The long-only minimum-variance weights solve

    min w' S w   subject to   sum(w) = 1,  w >= 0

with an active-set method: starting from equal weights with every
asset free, each iteration steps toward the equality-constrained
optimum on the free set, pins the first weight that hits zero, and
releases a pinned asset again when its dual multiplier turns negative.
The dual tolerance scales with the covariance so convergence checks
are unit-free.

The backtest rolls the estimation window over a chronological return
panel, rebuilds weights at each rebalance date from the configured
estimator, drifts them buy-and-hold between rebalances, and summarizes
each path by annualized Sharpe ratio, tracking error, and market
correlation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import evaluate
from .monomle import MonomvnConfig, estimate, extract_asset_block
from .panel import ReturnPanel, validate_and_order
from .regress import ALL_METHODS, CvSpec

__all__ = [
    "ConvergenceError",
    "PortfolioWeights",
    "min_variance",
    "kkt_residuals",
    "buy_and_hold",
    "PerformanceStats",
    "performance_stats",
    "BacktestConfig",
    "PathStats",
    "BacktestReport",
    "backtest",
    "parse_estimator_token",
]

_ACTIVE_THRESHOLD = 0.005   # weights above half a percent count as held


class ConvergenceError(RuntimeError):
    """The active-set solver failed to reach its tolerances."""


@dataclass(frozen=True)
class PortfolioWeights:
    weights: np.ndarray
    objective: float
    active_count: int


def _check_cov(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    if not np.isfinite(sigma).all():
        raise ValueError("covariance must be finite")
    return 0.5 * (sigma + sigma.T)


def _equality_solution(sigma: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Fully invested minimum-variance weights on the free subset."""
    ones = np.ones(free.size)
    factor = cho_factor(sigma[np.ix_(free, free)])
    x = cho_solve(factor, ones)
    return x / float(ones @ x)


def min_variance(sigma: np.ndarray, no_short: bool = True) -> PortfolioWeights:
    """Fully invested minimum-variance weights.

    With no_short the long-only problem is solved by the active-set
    method; otherwise the closed form S^-1 1 / (1' S^-1 1) is used and
    weights may be negative.  Requires a positive definite covariance
    (on every visited free subset in the long-only case).
    """
    sigma = _check_cov(sigma)
    m = sigma.shape[0]
    if m == 1:
        return PortfolioWeights(np.ones(1), float(sigma[0, 0]), 1)

    if not no_short:
        try:
            w = _equality_solution(sigma, np.arange(m))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("covariance is not positive definite") from exc
        obj = float(w @ sigma @ w)
        return PortfolioWeights(w, obj, int((w > _ACTIVE_THRESHOLD).sum()))

    scale = float(np.max(np.diag(sigma)))
    if scale <= 0:
        raise ConvergenceError("covariance diagonal is not positive")
    dual_tol = 1e-10 * scale
    step_tol = 1e-14

    w = np.full(m, 1.0 / m)
    free = np.ones(m, dtype=bool)
    max_iter = 10 * m * m + 50
    for _ in range(max_iter):
        idx = np.flatnonzero(free)
        try:
            target = _equality_solution(sigma, idx)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                "covariance is not positive definite on the active set"
            ) from exc
        direction = np.zeros(m)
        direction[idx] = target - w[idx]

        if np.max(np.abs(direction)) <= step_tol:
            grad = 2.0 * sigma @ w
            mu = float(grad[idx].mean())
            lam = grad - mu
            bound = np.flatnonzero(~free)
            if bound.size == 0 or lam[bound].min() >= -dual_tol:
                w = np.where(w < 0, 0.0, w)
                w /= w.sum()
                obj = float(w @ sigma @ w)
                return PortfolioWeights(
                    w, obj, int((w > _ACTIVE_THRESHOLD).sum())
                )
            free[bound[np.argmin(lam[bound])]] = True
            continue

        alpha = 1.0
        blocking = -1
        for i in idx:
            if direction[i] < 0:
                cand = w[i] / -direction[i]
                if cand < alpha:
                    alpha = cand
                    blocking = i
        w = w + alpha * direction
        if blocking >= 0:
            w[blocking] = 0.0
            free[blocking] = False
            if not free.any():
                raise ConvergenceError("active-set solver pinned every asset")

    res = kkt_residuals(sigma, w)
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations; residuals {res}"
    )


def kkt_residuals(sigma: np.ndarray, weights: np.ndarray) -> dict[str, float]:
    """Scaled optimality residuals of long-only minimum-variance weights.

    All four entries are ~0 at the exact solution: the budget residual,
    the worst negativity, the worst negative dual, and the worst
    complementarity product.  Dual quantities are divided by the
    largest covariance diagonal so the numbers are scale-free.
    """
    sigma = _check_cov(sigma)
    w = np.asarray(weights, dtype=float)
    scale = max(float(np.max(np.diag(sigma))), 1e-300)
    grad = 2.0 * sigma @ w
    mu = 2.0 * float(w @ sigma @ w)
    lam = grad - mu
    return {
        "budget": abs(float(w.sum()) - 1.0),
        "negativity": max(0.0, -float(w.min())),
        "dual": max(0.0, -float(lam.min())) / scale,
        "complementarity": float(np.max(np.abs(w * lam))) / scale,
    }


def buy_and_hold(weights: np.ndarray, returns: np.ndarray) -> np.ndarray:
    """Drift weights through one period of simple returns."""
    w = np.asarray(weights, dtype=float)
    gross = w * (1.0 + np.asarray(returns, dtype=float))
    total = float(gross.sum())
    if total <= 0:
        raise ValueError("portfolio value dropped to zero or below")
    return gross / total


@dataclass(frozen=True)
class PerformanceStats:
    """Summary of one return series, annualized where marked."""

    n_periods: int
    mean: float
    sd: float
    sharpe: float               # annualized, from excess returns
    annualized_mean: float
    annualized_sd: float
    tracking_error: float       # annualized sd of return minus market
    market_correlation: float


def performance_stats(returns: np.ndarray, market: np.ndarray | None = None,
                      rf: np.ndarray | float | None = None,
                      periods_per_year: int = 12) -> PerformanceStats:
    """Mean, volatility, Sharpe ratio, and market diagnostics.

    The Sharpe ratio uses returns in excess of rf; a zero-volatility
    series gets +/-inf (or 0 for an identically zero mean) so callers
    can still sort.  Market diagnostics are NaN when no market series
    is given.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("need a return series of length >= 2")
    if rf is None:
        excess = r
    else:
        excess = r - np.asarray(rf, dtype=float)
    mean = float(excess.mean())
    sd = float(excess.std(ddof=1))
    root = np.sqrt(periods_per_year)
    if sd > 0:
        sharpe = mean / sd * root
    else:
        sharpe = 0.0 if mean == 0 else float(np.sign(mean) * np.inf)
    te = np.nan
    corr = np.nan
    if market is not None:
        mkt = np.asarray(market, dtype=float)
        diff = r - mkt
        te = float(diff.std(ddof=1)) * root
        if r.std(ddof=1) > 0 and mkt.std(ddof=1) > 0:
            corr = float(np.corrcoef(r, mkt)[0, 1])
    return PerformanceStats(
        n_periods=r.size,
        mean=mean,
        sd=sd,
        sharpe=sharpe,
        annualized_mean=mean * periods_per_year,
        annualized_sd=sd * root,
        tracking_error=te,
        market_correlation=corr,
    )


def parse_estimator_token(token: str) -> tuple[str, str | None]:
    """Split an estimator token into (kind, method).

    Tokens: "equal", "complete", "observed", a regression method name,
    or "f+<method>" which prepends the market as a factor column and
    estimates the assets' covariance through it.
    """
    if token in ("equal", "complete", "observed"):
        return token, None
    if token.startswith("f+"):
        method = token[2:]
        if method not in ALL_METHODS:
            raise ValueError(f"unknown method in token {token!r}")
        return "factor", method
    if token in ALL_METHODS:
        return "model", token
    raise ValueError(f"unknown estimator token {token!r}")


@dataclass(frozen=True)
class BacktestConfig:
    """Settings for a rolling minimum-variance backtest.

    Each path draws its own asset subset (without replacement, when
    n_assets is set) and walks the panel chronologically: every
    `rebalance` periods the last `window` rows are handed to the
    estimator, long-only minimum-variance weights are rebuilt over the
    assets eligible at that date, and weights drift buy-and-hold in
    between.  Eligibility demands min_history observed rows
    immediately before the rebalance date and no interior gaps inside
    the window.  Estimation uses returns in excess of rf; the market
    column enters f+ tokens in excess of rf as well.
    """

    estimators: tuple[str, ...] = ("equal", "lasso")
    paths: int = 20
    n_assets: int | None = None
    window: int = 60
    min_history: int = 12
    rebalance: int = 12
    parsimony_p: float = 0.25
    periods_per_year: int = 12
    seed: int = 0
    cv: CvSpec = field(default_factory=CvSpec)
    mle_denominator: bool = False

    def __post_init__(self) -> None:
        for token in self.estimators:
            parse_estimator_token(token)
        if self.min_history < 2:
            raise ValueError("min_history must be at least 2")
        if self.window < self.min_history:
            raise ValueError("window must cover min_history")
        if self.rebalance < 1 or self.paths < 1:
            raise ValueError("rebalance and paths must be positive")
        if not 0.0 <= self.parsimony_p <= 1.0:
            raise ValueError("parsimony_p must lie in [0, 1]")


@dataclass(frozen=True)
class PathStats:
    path: int
    estimator: str
    stats: PerformanceStats
    failures: int


@dataclass
class BacktestReport:
    config: BacktestConfig
    estimators: list[str]
    path_stats: list[PathStats]

    def metric_matrix(self, attr: str) -> np.ndarray:
        """paths x estimators matrix of one PerformanceStats field."""
        out = np.full((self.config.paths, len(self.estimators)), np.nan)
        index = {name: j for j, name in enumerate(self.estimators)}
        for ps in self.path_stats:
            out[ps.path, index[ps.estimator]] = getattr(ps.stats, attr)
        return out

    def rows(self) -> list[dict]:
        out = []
        for ps in self.path_stats:
            s = ps.stats
            out.append({
                "path": ps.path,
                "estimator": ps.estimator,
                "n_periods": s.n_periods,
                "mean": s.mean,
                "sd": s.sd,
                "sharpe": s.sharpe,
                "annualized_mean": s.annualized_mean,
                "annualized_sd": s.annualized_sd,
                "tracking_error": s.tracking_error,
                "market_correlation": s.market_correlation,
                "failures": ps.failures,
            })
        return out


def _eligible(observed: np.ndarray, t: int, window: int, min_history: int) -> np.ndarray:
    """Columns observed through the min_history rows before t with no
    interior gap inside the window."""
    lo = max(0, t - window)
    recent = observed[t - min_history:t]
    ok = recent.all(axis=0)
    span = observed[lo:t]
    for j in np.flatnonzero(ok):
        col = span[:, j]
        first = int(np.argmax(col))
        if not col[first:].all():
            ok[j] = False
    return ok


def _window_panel(excess: np.ndarray, labels, cols: np.ndarray,
                  lo: int, t: int) -> tuple[ReturnPanel, object]:
    # reverse: panel convention puts the most recent row first
    grid = excess[lo:t][::-1][:, cols]
    names = tuple(labels[j] for j in cols)
    return validate_and_order(grid, names)


def _weights_for(kind: str, method: str | None, excess: np.ndarray,
                 mkt_excess: np.ndarray | None, labels, cols: np.ndarray,
                 lo: int, t: int, config: BacktestConfig) -> np.ndarray:
    k = cols.size
    if kind == "equal":
        return np.full(k, 1.0 / k)
    if kind == "complete":
        panel, _ = _window_panel(excess, labels, cols, lo, t)
        est = evaluate.complete_estimator(
            panel, ddof=0 if config.mle_denominator else 1)
        return min_variance(est.covariance).weights
    if kind == "observed":
        panel, _ = _window_panel(excess, labels, cols, lo, t)
        est = evaluate.observed_estimator(panel)
        return min_variance(est.covariance).weights
    mono_config = MonomvnConfig(
        method=method, parsimony_p=config.parsimony_p, cv=config.cv,
        factor_count=1 if kind == "factor" else 0,
        mle_denominator=config.mle_denominator,
    )
    if kind == "factor":
        if mkt_excess is None:
            raise ValueError("f+ estimators need a market series")
        grid = np.column_stack([mkt_excess[lo:t], excess[lo:t][:, cols]])[::-1]
        names = ("MKT",) + tuple(labels[j] for j in cols)
        panel, order = validate_and_order(grid, names)
        est = extract_asset_block(estimate(panel, order, mono_config), 1)
    else:
        panel, order = _window_panel(excess, labels, cols, lo, t)
        est = estimate(panel, order, mono_config)
    return min_variance(est.covariance).weights


def backtest(returns: np.ndarray, labels, config: BacktestConfig,
             market: np.ndarray | None = None,
             rf: np.ndarray | float | None = None) -> BacktestReport:
    """Run the rolling backtest over a chronological return grid.

    returns has one row per period, oldest first, NaN for missing.
    Assets without a return during a holding period contribute zero
    for that period.  When an estimator fails at a rebalance date
    (singular window, non-convergent solver) the previous weights are
    kept and the failure is counted.
    """
    R = np.asarray(returns, dtype=float)
    if R.ndim != 2:
        raise ValueError("returns must be a 2-d grid")
    T, N = R.shape
    if market is not None:
        market = np.asarray(market, dtype=float)
        if market.shape != (T,) or not np.isfinite(market).all():
            raise ValueError("market must be a complete series of length T")
    if rf is None:
        rf_arr = np.zeros(T)
    elif np.isscalar(rf):
        rf_arr = np.full(T, float(rf))
    else:
        rf_arr = np.asarray(rf, dtype=float)
        if rf_arr.shape != (T,) or not np.isfinite(rf_arr).all():
            raise ValueError("rf must be a complete series of length T")
    if T < config.window + 2:
        raise ValueError("panel too short for the estimation window")

    excess = R - rf_arr[:, None]
    mkt_excess = market - rf_arr if market is not None else None
    observed = ~np.isnan(R)
    first_date = config.window
    dates = list(range(first_date, T, config.rebalance))
    if not dates or dates[0] >= T - 1:
        raise ValueError("no holding periods after the first window")

    tokens = [(name, *parse_estimator_token(name)) for name in config.estimators]
    report = BacktestReport(config=config,
                            estimators=list(config.estimators), path_stats=[])

    for path in range(config.paths):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, path)))
        if config.n_assets is not None and config.n_assets < N:
            subset = np.sort(rng.choice(N, size=config.n_assets, replace=False))
        else:
            subset = np.arange(N)

        for name, kind, method in tokens:
            series: list[float] = []
            span: list[int] = []
            failures = 0
            weights = None
            cols = None
            for d, t in enumerate(dates):
                ok = _eligible(observed[:, subset], t, config.window,
                               config.min_history)
                new_cols = subset[ok]
                if new_cols.size >= 2:
                    lo = max(0, t - config.window)
                    try:
                        w = _weights_for(kind, method, excess, mkt_excess,
                                         labels, new_cols, lo, t, config)
                        weights, cols = w, new_cols
                    except Exception:
                        failures += 1
                if weights is None:
                    continue
                stop = dates[d + 1] if d + 1 < len(dates) else T
                for u in range(t, stop):
                    r_u = np.nan_to_num(R[u, cols], nan=0.0)
                    series.append(float(weights @ r_u))
                    span.append(u)
                    weights = buy_and_hold(weights, r_u)
            if len(series) < 2:
                continue
            held = np.array(series)
            idx = np.array(span)
            stats = performance_stats(
                held,
                market=market[idx] if market is not None else None,
                rf=rf_arr[idx],
                periods_per_year=config.periods_per_year,
            )
            report.path_stats.append(
                PathStats(path=path, estimator=name, stats=stats,
                          failures=failures)
            )
    return report
