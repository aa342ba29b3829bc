"""Regression fitters used inside the monotone estimation recursion.

Every fitter shares one set of conventions.  Predictors and response
are centred; predictors are additionally scaled to unit sample
standard deviation (ddof=1); the intercept is never penalised; and
coefficients are mapped back to the original scale before they are
returned.  Exactly-constant predictor columns are excluded from the
penalised system and receive coefficient 0.  Residual variance uses
the denominator n - ddof with ddof=1 by default.

The penalised fitters tune their single hyperparameter by K-fold or
leave-one-out cross-validation on mean squared prediction error,
refitting the standardisation inside every training fold.  Grids are
ordered with the most parsimonious setting first so that score ties
resolve toward the smaller model.  Multi-response inputs are fitted
one response at a time with shared folds; factorisations of the
design are shared across responses where the method allows it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RankDeficient",
    "CvSpec",
    "CvCurve",
    "Selection",
    "RegressionFit",
    "fit_ols",
    "fit_ridge",
    "fit_lars_family",
    "fit_pcr",
    "fit_plsr",
    "fit_factor_parsimony",
    "cross_validate",
    "lars_path",
    "predict",
    "PARSIMONIOUS_METHODS",
    "ALL_METHODS",
]

_RANK_TOL = 1e-10
_RIDGE_GRID_SIZE = 100
_LARS_POSITIONS = np.linspace(0.0, 1.0, 100)

PARSIMONIOUS_METHODS = ("ridge", "lasso", "lar", "stepwise", "pcr", "plsr",
                        "factor-parsimony")
ALL_METHODS = ("ols",) + PARSIMONIOUS_METHODS

_DEFAULT_RULE = {
    "ridge": "minimum-score",
    "pcr": "minimum-score",
    "plsr": "minimum-score",
    "lasso": "one-standard-error",
    "lar": "one-standard-error",
    "stepwise": "one-standard-error",
}


class RankDeficient(ValueError):
    """Least squares was requested on a numerically singular design."""


@dataclass(frozen=True)
class CvSpec:
    """Cross-validation plan.

    scheme is "tenfold" (seeded K-fold with folds as even as possible)
    or "loo"/"leave-one-out" (deterministic, seed ignored).  rule picks
    between "minimum-score" and "one-standard-error"; None defers to
    the per-method default.  Fold counts are clamped to the number of
    rows.
    """

    scheme: str = "tenfold"
    folds: int = 10
    seed: int = 0
    rule: str | None = None


@dataclass
class CvCurve:
    """Score curve over one hyperparameter grid, parsimonious end first."""

    grid: np.ndarray
    mean_score: np.ndarray
    se_score: np.ndarray
    chosen_index: int
    rule: str


@dataclass
class Selection:
    """Hyperparameter choice recorded on a fit.

    kind is "penalty" (ridge lambda, or the lasso/lar correlation
    threshold at the chosen path point), "components" (PCR/PLSR) or
    "steps" (forward stepwise).
    """

    kind: str
    value: float
    cv_score: float | None = None
    rule: str | None = None


@dataclass
class RegressionFit:
    """A fitted regression in original coordinates.

    For a single response, coefficients has shape (p,) and
    residual_variance is set; for q responses, coefficients has shape
    (p, q), intercept shape (q,), and residual_covariance is the q x q
    sample covariance of the stacked residuals.  n_zero counts exact
    zeros in the coefficient array.
    """

    intercept: float | np.ndarray
    coefficients: np.ndarray
    residual_variance: float | None
    residual_covariance: np.ndarray | None
    method: str
    selection: Selection | list[Selection] | None
    n_zero: int


def predict(fit: RegressionFit, X) -> np.ndarray:
    """Evaluate a fit (single or multi response) at new rows."""
    X = np.asarray(X, dtype=float)
    return X @ fit.coefficients + fit.intercept


# ---------------------------------------------------------------------------
# shared plumbing


def _as_xy(X, y) -> tuple[np.ndarray, np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    Y = np.asarray(y, dtype=float)
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] != X.shape[0]:
        raise ValueError("y rows must match X rows")
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    if X.shape[1] < 1:
        raise ValueError("need at least one predictor column")
    if not np.isfinite(X).all() or not np.isfinite(Y).all():
        raise ValueError("regression data must be finite")
    return X, Y, squeeze


class _Standardizer:
    """Center/scale state for one training design."""

    def __init__(self, X: np.ndarray, Y: np.ndarray):
        n, p = X.shape
        self.p = p
        self.x_mean = X.mean(axis=0)
        if n >= 2:
            centered = X - self.x_mean
            sd = np.sqrt((centered * centered).sum(axis=0) / (n - 1))
        else:
            sd = np.zeros(p)
        self.keep = np.flatnonzero(sd > 0.0)
        self.x_scale = np.where(sd > 0.0, sd, 1.0)
        self.Xs = (X[:, self.keep] - self.x_mean[self.keep]) / self.x_scale[self.keep]
        self.y_mean = Y.mean(axis=0)
        self.Yc = Y - self.y_mean

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.keep] - self.x_mean[self.keep]) / self.x_scale[self.keep]

    def coefficients(self, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map standardized-space coefficients back to original scale."""
        q = gamma.shape[1]
        beta = np.zeros((self.p, q))
        if self.keep.size:
            beta[self.keep] = gamma / self.x_scale[self.keep, None]
        intercept = self.y_mean - self.x_mean @ beta
        return beta, intercept


def _fold_indices(n: int, cv: CvSpec) -> list[np.ndarray]:
    scheme = cv.scheme.lower()
    if scheme in ("loo", "leave-one-out"):
        return [np.array([i]) for i in range(n)]
    if scheme != "tenfold":
        raise ValueError(f"unknown cross-validation scheme {cv.scheme!r}")
    k = min(cv.folds, n)
    if k < 2:
        raise ValueError("K-fold cross-validation needs at least 2 folds")
    perm = np.random.default_rng(cv.seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def _cv_mse(make, X, Y, cv, n_grid) -> tuple[np.ndarray, np.ndarray]:
    """Pooled CV mean squared error per response and grid point."""
    n, q = X.shape[0], Y.shape[1]
    folds = _fold_indices(n, cv)
    n_folds = len(folds)
    fold_mse = np.empty((n_folds, q, n_grid))
    sizes = np.empty(n_folds)
    for fi, test in enumerate(folds):
        sizes[fi] = test.size
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        preds = make(X[mask], Y[mask])(X[test])
        err = preds - Y[test][:, :, None]
        fold_mse[fi] = np.mean(err * err, axis=0)
    mean = np.tensordot(sizes / sizes.sum(), fold_mse, axes=1)
    if n_folds >= 2:
        se = fold_mse.std(axis=0, ddof=1) / np.sqrt(n_folds)
    else:
        se = np.zeros_like(mean)
    return mean, se


def _select_index(mean_g: np.ndarray, se_g: np.ndarray, rule: str) -> int:
    i_min = int(np.argmin(mean_g))
    if rule == "one-standard-error":
        threshold = mean_g[i_min] + se_g[i_min]
        hits = np.flatnonzero(mean_g <= threshold)
        if hits.size:
            return int(hits[0])
    return i_min


def _finish(method, X, Y, squeeze, beta, intercept, ddof, selections,
            diagonal_cov=False) -> RegressionFit:
    n = X.shape[0]
    residuals = Y - (X @ beta + intercept)
    denom = max(n - ddof, 1)
    n_zero = int(np.count_nonzero(beta == 0.0))
    if squeeze:
        r = residuals[:, 0]
        return RegressionFit(
            intercept=float(intercept[0]),
            coefficients=beta[:, 0].copy(),
            residual_variance=float(r @ r / denom),
            residual_covariance=None,
            method=method,
            selection=selections[0] if selections else None,
            n_zero=n_zero,
        )
    V = residuals.T @ residuals / denom
    if diagonal_cov:
        V = np.diag(np.diag(V))
    return RegressionFit(
        intercept=intercept.copy(),
        coefficients=beta,
        residual_variance=None,
        residual_covariance=V,
        method=method,
        selection=list(selections) if selections else None,
        n_zero=n_zero,
    )


def _intercept_only(method, X, Y, squeeze, ddof) -> RegressionFit:
    beta = np.zeros((X.shape[1], Y.shape[1]))
    return _finish(method, X, Y, squeeze, beta, Y.mean(axis=0), ddof, [],
                   diagonal_cov=(method == "factor-parsimony"))


# ---------------------------------------------------------------------------
# ordinary least squares


def _ols_solve(A: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Solve min ||A c - Y|| demanding full numerical column rank."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size < A.shape[1] or s[-1] <= _RANK_TOL * s[0]:
        raise RankDeficient(
            f"design with shape {A.shape} is numerically rank deficient"
        )
    return Vt.T @ ((U.T @ Y) / s[:, None])


def fit_ols(X, y, *, ddof: int = 1) -> RegressionFit:
    """Least squares with an intercept.

    Raises RankDeficient when rows do not exceed the augmented column
    count or the design is numerically singular (relative singular
    value below 1e-10).
    """
    X, Y, squeeze = _as_xy(X, y)
    n, p = X.shape
    coefs = _ols_solve(np.column_stack([np.ones(n), X]), Y)
    return _finish("ols", X, Y, squeeze, coefs[1:], coefs[0], ddof, [])


# ---------------------------------------------------------------------------
# ridge


def _ridge_grid(n: int) -> np.ndarray:
    # mean diagonal of the standardized Gram matrix is n - 1
    g = max(n - 1, 1)
    return np.geomspace(1e4 * g, 1e-4 * g, _RIDGE_GRID_SIZE)


def _ridge_factory(grid: np.ndarray):
    def make(Xtr, Ytr):
        st = _Standardizer(Xtr, Ytr)
        q = Ytr.shape[1]
        if st.Xs.shape[1] == 0:
            def flat(Xte):
                out = np.empty((Xte.shape[0], q, grid.size))
                out[...] = st.y_mean[None, :, None]
                return out
            return flat
        U, d, Vt = np.linalg.svd(st.Xs, full_matrices=False)
        UtY = U.T @ st.Yc

        def predicts(Xte):
            scores = st.transform(Xte) @ Vt.T
            out = np.empty((Xte.shape[0], q, grid.size))
            for gi, lam in enumerate(grid):
                shrink = d / (d * d + lam)
                out[:, :, gi] = scores @ (shrink[:, None] * UtY) + st.y_mean
            return out

        return predicts

    return make


def _ridge_gamma(st: _Standardizer, lam_per_response: np.ndarray) -> np.ndarray:
    U, d, Vt = np.linalg.svd(st.Xs, full_matrices=False)
    UtY = U.T @ st.Yc
    gamma = np.empty((st.Xs.shape[1], st.Yc.shape[1]))
    for r in range(st.Yc.shape[1]):
        lam = lam_per_response[r]
        if lam == 0.0:
            # pseudo-inverse solution: penalty off
            shrink = np.where(d > _RANK_TOL * d[0], 1.0, 0.0) / np.where(d > 0, d, 1.0)
        else:
            shrink = d / (d * d + lam)
        gamma[:, r] = Vt.T @ (shrink * UtY[:, r])
    return gamma


def fit_ridge(X, y, cv: CvSpec | None = None, *, lam: float | None = None,
              ddof: int = 1) -> RegressionFit:
    """Ridge regression with a CV-chosen penalty.

    The penalty grid holds 100 log-spaced values from 1e-4*g to 1e4*g
    where g is the mean diagonal of the standardized Gram matrix.
    Passing lam skips cross-validation; lam=0 reproduces least squares
    (via the pseudo-inverse when the design is wide).  A zero-variance
    response yields the intercept-only fit.
    """
    X, Y, squeeze = _as_xy(X, y)
    n, p = X.shape
    q = Y.shape[1]
    st = _Standardizer(X, Y)
    if st.Xs.shape[1] == 0:
        return _intercept_only("ridge", X, Y, squeeze, ddof)
    grid = _ridge_grid(n)
    if lam is not None:
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        lam_per = np.full(q, float(lam))
        selections = [Selection("penalty", float(lam)) for _ in range(q)]
    else:
        cv = cv or CvSpec()
        rule = cv.rule or _DEFAULT_RULE["ridge"]
        mean, se = _cv_mse(_ridge_factory(grid), X, Y, cv, grid.size)
        picks = [_select_index(mean[r], se[r], rule) for r in range(q)]
        lam_per = grid[picks]
        selections = [
            Selection("penalty", float(grid[i]), cv_score=float(mean[r, i]), rule=rule)
            for r, i in enumerate(picks)
        ]
    beta, intercept = st.coefficients(_ridge_gamma(st, lam_per))
    return _finish("ridge", X, Y, squeeze, beta, intercept, ddof, selections)


# ---------------------------------------------------------------------------
# least angle regression family


def lars_path(Xs, yc, variant: str = "lasso", max_active: int | None = None):
    """Piecewise-linear coefficient path on a standardized design.

    Parameters
    ----------
    Xs : ndarray, shape (n, p)
        Centered predictors (unit scaling recommended).
    yc : ndarray, shape (n,)
        Centered response.
    variant : "lasso" or "lar"
        The lasso variant drops a variable when its coefficient
        crosses zero, restoring the lasso solution path; plain "lar"
        never drops.
    max_active : int, optional
        Active-set cap; defaults to min(p, n - 1).

    Returns
    -------
    (thresholds, coefs)
        thresholds is the non-increasing sequence of maximal absolute
        predictor-residual correlations C_k at each knot; coefs[k] is
        the coefficient vector at that knot.  Between knots the
        solution is exactly linear in the threshold.
    """
    Xs = np.asarray(Xs, dtype=float)
    yc = np.asarray(yc, dtype=float)
    n, p = Xs.shape
    if max_active is None:
        max_active = min(p, max(n - 1, 1))
    coef = np.zeros(p)
    c = Xs.T @ yc
    C = float(np.max(np.abs(c))) if p else 0.0
    thresholds = [C]
    coefs = [coef.copy()]
    if p == 0 or C <= 0.0:
        return np.array(thresholds), np.array(coefs)
    tiny = 1e-12 * C
    active: list[int] = []
    sign = np.zeros(p)
    skip_add = False
    for _ in range(8 * max_active + 16):
        if len(active) >= max_active or C <= tiny:
            break
        if not skip_add:
            masked = np.abs(c).copy()
            masked[active] = -np.inf
            entering = int(np.argmax(masked))
            active.append(entering)
            sign[entering] = 1.0 if c[entering] >= 0 else -1.0
        skip_add = False
        idx = np.array(active)
        sa = sign[idx]
        XA = Xs[:, idx] * sa
        gram = XA.T @ XA
        try:
            w1 = np.linalg.solve(gram, np.ones(idx.size))
        except np.linalg.LinAlgError:
            break
        total = float(w1.sum())
        if total <= 0:
            break
        norm_a = 1.0 / np.sqrt(total)
        w = norm_a * w1
        a = Xs.T @ (XA @ w)
        c_max = float(np.max(np.abs(c[idx])))
        gamma = c_max / norm_a
        rest = np.ones(p, dtype=bool)
        rest[idx] = False
        rest_idx = np.flatnonzero(rest)
        if rest_idx.size:
            cr = c[rest_idx]
            ar = a[rest_idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                cands = np.concatenate(
                    [(c_max - cr) / (norm_a - ar), (c_max + cr) / (norm_a + ar)]
                )
            cands = cands[np.isfinite(cands) & (cands > 0.0)]
            if cands.size:
                gamma = min(gamma, float(cands.min()))
        directions = sa * w
        dropped = None
        if variant == "lasso":
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = -coef[idx] / directions
            ratios = np.where(np.isfinite(ratios), ratios, np.inf)
            ratios[ratios <= 0.0] = np.inf
            k = int(np.argmin(ratios))
            if ratios[k] < gamma:
                gamma = float(ratios[k])
                dropped = active[k]
        coef[idx] += gamma * directions
        if dropped is not None:
            coef[dropped] = 0.0
            active.remove(dropped)
            sign[dropped] = 0.0
            skip_add = True
        c = Xs.T @ (yc - Xs @ coef)
        C = float(np.max(np.abs(c)))
        thresholds.append(C)
        coefs.append(coef.copy())
    return np.array(thresholds), np.array(coefs)


def _coef_at_threshold(thresholds: np.ndarray, coefs: np.ndarray,
                       lam: float) -> np.ndarray:
    """Exact path solution at correlation threshold lam (clipped to range)."""
    if lam >= thresholds[0]:
        return coefs[0].copy()
    if lam <= thresholds[-1]:
        return coefs[-1].copy()
    k = int(np.searchsorted(-thresholds, -lam, side="right")) - 1
    k = max(0, min(k, len(thresholds) - 2))
    hi, lo = thresholds[k], thresholds[k + 1]
    if hi <= lo:
        return coefs[k + 1].copy()
    weight = (hi - lam) / (hi - lo)
    return (1.0 - weight) * coefs[k] + weight * coefs[k + 1]


def _lars_factory(variant: str):
    def make(Xtr, Ytr):
        st = _Standardizer(Xtr, Ytr)
        q = Ytr.shape[1]
        paths = []
        for r in range(q):
            if st.Xs.shape[1] == 0:
                paths.append(None)
            else:
                paths.append(lars_path(st.Xs, st.Yc[:, r], variant))

        def predicts(Xte):
            out = np.empty((Xte.shape[0], q, _LARS_POSITIONS.size))
            scores = st.transform(Xte) if st.Xs.shape[1] else None
            for r in range(q):
                if paths[r] is None or paths[r][0][0] <= 0.0:
                    out[:, r, :] = st.y_mean[r]
                    continue
                thr, cfs = paths[r]
                lam0 = thr[0]
                for gi, t in enumerate(_LARS_POSITIONS):
                    gamma = _coef_at_threshold(thr, cfs, (1.0 - t) * lam0)
                    out[:, r, gi] = scores @ gamma + st.y_mean[r]
            return out

        return predicts

    return make


def _stepwise_path(Xs: np.ndarray, yc: np.ndarray, max_steps: int):
    """Greedy forward selection with full OLS refits along the path.

    Returns the list of coefficient vectors for step counts
    0..k_reached; step 0 is the null model.
    """
    n, p = Xs.shape
    betas = [np.zeros(p)]
    active: list[int] = []
    residual = yc.copy()
    Xres = Xs.copy()
    base = (Xs * Xs).sum(axis=0)
    y_norm = float(yc @ yc)
    for _ in range(max_steps):
        zz = (Xres * Xres).sum(axis=0)
        usable = zz > 1e-20 * np.maximum(base, 1e-300)
        usable[active] = False
        if not usable.any():
            break
        gains = np.zeros(p)
        cols = np.flatnonzero(usable)
        proj = Xres[:, cols].T @ residual
        gains[cols] = proj * proj / zz[cols]
        j = int(np.argmax(gains))
        if gains[j] <= 1e-24 * max(y_norm, 1e-300):
            break
        qvec = Xres[:, j] / np.sqrt(zz[j])
        residual = residual - qvec * (qvec @ residual)
        Xres = Xres - np.outer(qvec, qvec @ Xres)
        active.append(j)
        coef_active, *_ = np.linalg.lstsq(Xs[:, active], yc, rcond=None)
        beta = np.zeros(p)
        beta[active] = coef_active
        betas.append(beta)
    return betas


def _stepwise_factory(k_grid: np.ndarray):
    def make(Xtr, Ytr):
        st = _Standardizer(Xtr, Ytr)
        q = Ytr.shape[1]
        cap = min(st.Xs.shape[1], max(Xtr.shape[0] - 1, 0))
        paths = [
            _stepwise_path(st.Xs, st.Yc[:, r], cap) if st.Xs.shape[1] else [np.zeros(0)]
            for r in range(q)
        ]

        def predicts(Xte):
            out = np.empty((Xte.shape[0], q, k_grid.size))
            scores = st.transform(Xte) if st.Xs.shape[1] else None
            for r in range(q):
                betas = paths[r]
                for gi, k in enumerate(k_grid):
                    beta = betas[min(int(k), len(betas) - 1)]
                    if scores is None:
                        out[:, r, gi] = st.y_mean[r]
                    else:
                        out[:, r, gi] = scores @ beta + st.y_mean[r]
            return out

        return predicts

    return make


def fit_lars_family(X, y, variant: str = "lasso", cv: CvSpec | None = None, *,
                    position: float | None = None, ddof: int = 1) -> RegressionFit:
    """Lasso, least angle, or forward stepwise via a common path scheme.

    lasso/lar compute the full piecewise-linear path, truncated at
    min(p, n - 1) active variables, and tune the relative path
    position t on a 100-point grid: t=0 is the null model (penalty at
    the maximal predictor-response correlation) and t=1 the path end.
    stepwise tunes the integer step count on 0..min(p, n - 1) with a
    full least-squares refit at each step.  The default selection rule
    is one-standard-error; coefficients of never-active predictors are
    exact zeros.

    position overrides cross-validation: a relative position in [0, 1]
    for lasso/lar, a step count for stepwise.
    """
    if variant not in ("lasso", "lar", "stepwise"):
        raise ValueError(f"unknown variant {variant!r}")
    X, Y, squeeze = _as_xy(X, y)
    n, p = X.shape
    q = Y.shape[1]
    st = _Standardizer(X, Y)
    if st.Xs.shape[1] == 0:
        return _intercept_only(variant, X, Y, squeeze, ddof)
    cv = cv or CvSpec()
    rule = cv.rule or _DEFAULT_RULE[variant]

    if variant == "stepwise":
        # leave one residual degree of freedom beyond the intercept
        cap = min(st.Xs.shape[1], max(n - 2, 0))
        k_grid = np.arange(0, cap + 1)
        if position is not None:
            picks = [int(position)] * q
            if not 0 <= picks[0] <= cap:
                raise ValueError("step count out of range")
            selections = [Selection("steps", float(picks[0])) for _ in range(q)]
            scores = None
        else:
            mean, se = _cv_mse(_stepwise_factory(k_grid), X, Y, cv, k_grid.size)
            picks = [_select_index(mean[r], se[r], rule) for r in range(q)]
            selections = [
                Selection("steps", float(k_grid[i]), cv_score=float(mean[r, i]), rule=rule)
                for r, i in enumerate(picks)
            ]
        gamma = np.zeros((st.Xs.shape[1], q))
        for r in range(q):
            betas = _stepwise_path(st.Xs, st.Yc[:, r], cap)
            gamma[:, r] = betas[min(picks[r], len(betas) - 1)]
        beta, intercept = st.coefficients(gamma)
        return _finish("stepwise", X, Y, squeeze, beta, intercept, ddof, selections)

    if position is not None:
        if not 0.0 <= position <= 1.0:
            raise ValueError("position must lie in [0, 1]")
        positions = np.full(q, float(position))
        picks = None
        cv_mean = None
    else:
        cv_mean, se = _cv_mse(_lars_factory(variant), X, Y, cv, _LARS_POSITIONS.size)
        picks = [_select_index(cv_mean[r], se[r], rule) for r in range(q)]
        positions = _LARS_POSITIONS[picks]
    gamma = np.zeros((st.Xs.shape[1], q))
    selections = []
    for r in range(q):
        thr, cfs = lars_path(st.Xs, st.Yc[:, r], variant)
        lam = (1.0 - positions[r]) * thr[0]
        gamma[:, r] = _coef_at_threshold(thr, cfs, lam)
        if picks is not None:
            selections.append(
                Selection("penalty", float(lam),
                          cv_score=float(cv_mean[r, picks[r]]), rule=rule)
            )
        else:
            selections.append(Selection("penalty", float(lam)))
    beta, intercept = st.coefficients(gamma)
    return _finish(variant, X, Y, squeeze, beta, intercept, ddof, selections)


# ---------------------------------------------------------------------------
# principal components regression


def _pcr_factory(k_grid: np.ndarray):
    def make(Xtr, Ytr):
        st = _Standardizer(Xtr, Ytr)
        q = Ytr.shape[1]
        if st.Xs.shape[1] == 0:
            def flat(Xte):
                out = np.empty((Xte.shape[0], q, k_grid.size))
                out[...] = st.y_mean[None, :, None]
                return out
            return flat
        U, d, Vt = np.linalg.svd(st.Xs, full_matrices=False)
        rank = int(np.count_nonzero(d > _RANK_TOL * d[0])) if d.size else 0
        UtY = U.T @ st.Yc

        def predicts(Xte):
            scores = st.transform(Xte) @ Vt.T
            out = np.empty((Xte.shape[0], q, k_grid.size))
            running = np.tile(st.y_mean, (Xte.shape[0], 1))
            used = 0
            for gi, k in enumerate(k_grid):
                target = min(int(k), rank)
                while used < target:
                    # components accumulate one at a time up to this k
                    running = running + np.outer(scores[:, used], UtY[used] / d[used])
                    used += 1
                out[:, :, gi] = running
            return out

        return predicts

    return make


def fit_pcr(X, y, cv: CvSpec | None = None, *, components: int | None = None,
            ddof: int = 1) -> RegressionFit:
    """Principal components regression on the standardized design.

    Cross-validation tunes k over 1..min(p, n - 2) (one residual
    degree of freedom is always kept so the chosen fit cannot
    interpolate); predictions truncate k at the numerical rank
    (relative singular value threshold 1e-10).  An explicit
    `components` may go up to min(p, n - 1); with k equal to the full
    column rank of a tall design the fit reproduces least squares.
    """
    X, Y, squeeze = _as_xy(X, y)
    n, p = X.shape
    q = Y.shape[1]
    st = _Standardizer(X, Y)
    if st.Xs.shape[1] == 0:
        return _intercept_only("pcr", X, Y, squeeze, ddof)
    hard_cap = min(st.Xs.shape[1], n - 1)
    kmax = min(st.Xs.shape[1], n - 2)
    if (kmax if components is None else hard_cap) < 1:
        return _intercept_only("pcr", X, Y, squeeze, ddof)
    k_grid = np.arange(1, max(kmax, 1) + 1)
    if components is not None:
        if not 1 <= components <= hard_cap:
            raise ValueError(f"components must lie in 1..{hard_cap}")
        picks = [int(components)] * q
        selections = [Selection("components", float(components)) for _ in range(q)]
    else:
        cv = cv or CvSpec()
        rule = cv.rule or _DEFAULT_RULE["pcr"]
        mean, se = _cv_mse(_pcr_factory(k_grid), X, Y, cv, k_grid.size)
        idx = [_select_index(mean[r], se[r], rule) for r in range(q)]
        picks = [int(k_grid[i]) for i in idx]
        selections = [
            Selection("components", float(k_grid[i]), cv_score=float(mean[r, i]), rule=rule)
            for r, i in enumerate(idx)
        ]
    U, d, Vt = np.linalg.svd(st.Xs, full_matrices=False)
    rank = int(np.count_nonzero(d > _RANK_TOL * d[0]))
    UtY = U.T @ st.Yc
    gamma = np.zeros((st.Xs.shape[1], q))
    for r in range(q):
        k_use = min(picks[r], rank)
        if k_use:
            gamma[:, r] = Vt[:k_use].T @ (UtY[:k_use, r] / d[:k_use])
    beta, intercept = st.coefficients(gamma)
    return _finish("pcr", X, Y, squeeze, beta, intercept, ddof, selections)


# ---------------------------------------------------------------------------
# partial least squares


def _pls_coef_path(Xs: np.ndarray, yc: np.ndarray, kmax: int) -> list[np.ndarray]:
    """Orthogonal-scores partial least squares, deflating X only.

    Returns standardized-space coefficient vectors for component
    counts 1..k_reached.  The first weight vector is X'y normalised
    (the SVD of X'y in the single-response case); an exactly zero X'y
    yields an empty path.
    """
    n, p = Xs.shape
    betas: list[np.ndarray] = []
    Xd = Xs.copy()
    weights: list[np.ndarray] = []
    loadings: list[np.ndarray] = []
    q_loads: list[float] = []
    base = float(np.linalg.norm(Xs.T @ yc))
    first_tt = None
    for _ in range(kmax):
        w = Xd.T @ yc
        nw = float(np.linalg.norm(w))
        if nw <= 1e-10 * max(base, 1e-300):
            break
        w /= nw
        t = Xd @ w
        tt = float(t @ t)
        if first_tt is None:
            first_tt = tt
        if tt <= 1e-24 * max(first_tt, 1e-300):
            break
        p_load = Xd.T @ t / tt
        weights.append(w)
        loadings.append(p_load)
        q_loads.append(float(yc @ t) / tt)
        Xd = Xd - np.outer(t, p_load)
        W = np.column_stack(weights)
        P = np.column_stack(loadings)
        try:
            beta = W @ np.linalg.solve(P.T @ W, np.asarray(q_loads))
        except np.linalg.LinAlgError:
            break
        betas.append(beta)
    return betas


def _pls_factory(k_grid: np.ndarray):
    def make(Xtr, Ytr):
        st = _Standardizer(Xtr, Ytr)
        q = Ytr.shape[1]
        cap = min(st.Xs.shape[1], max(Xtr.shape[0] - 1, 0))
        paths = [
            _pls_coef_path(st.Xs, st.Yc[:, r], cap) if st.Xs.shape[1] else []
            for r in range(q)
        ]

        def predicts(Xte):
            out = np.empty((Xte.shape[0], q, k_grid.size))
            scores = st.transform(Xte) if st.Xs.shape[1] else None
            for r in range(q):
                betas = paths[r]
                for gi, k in enumerate(k_grid):
                    if not betas or scores is None:
                        out[:, r, gi] = st.y_mean[r]
                    else:
                        beta = betas[min(int(k), len(betas)) - 1]
                        out[:, r, gi] = scores @ beta + st.y_mean[r]
            return out

        return predicts

    return make


def fit_plsr(X, y, cv: CvSpec | None = None, *, components: int | None = None,
             ddof: int = 1) -> RegressionFit:
    """Partial least squares regression (orthogonal scores, X deflated).

    Cross-validation tunes the component count over 1..min(p, n - 2)
    so the chosen fit keeps a residual degree of freedom; an explicit
    `components` may go up to min(p, n - 1).  When the path saturates
    at the design's rank the fit coincides with least squares.  A
    response exactly uncorrelated with every predictor gives the
    intercept-only fit.
    """
    X, Y, squeeze = _as_xy(X, y)
    n, p = X.shape
    q = Y.shape[1]
    st = _Standardizer(X, Y)
    if st.Xs.shape[1] == 0:
        return _intercept_only("plsr", X, Y, squeeze, ddof)
    hard_cap = min(st.Xs.shape[1], n - 1)
    kmax = min(st.Xs.shape[1], n - 2)
    if (kmax if components is None else hard_cap) < 1:
        return _intercept_only("plsr", X, Y, squeeze, ddof)
    k_grid = np.arange(1, max(kmax, 1) + 1)
    if components is not None:
        if not 1 <= components <= hard_cap:
            raise ValueError(f"components must lie in 1..{hard_cap}")
        picks = [int(components)] * q
        selections = [Selection("components", float(components)) for _ in range(q)]
    else:
        cv = cv or CvSpec()
        rule = cv.rule or _DEFAULT_RULE["plsr"]
        mean, se = _cv_mse(_pls_factory(k_grid), X, Y, cv, k_grid.size)
        idx = [_select_index(mean[r], se[r], rule) for r in range(q)]
        picks = [int(k_grid[i]) for i in idx]
        selections = [
            Selection("components", float(k_grid[i]), cv_score=float(mean[r, i]), rule=rule)
            for r, i in enumerate(idx)
        ]
    gamma = np.zeros((st.Xs.shape[1], q))
    for r in range(q):
        betas = _pls_coef_path(st.Xs, st.Yc[:, r], hard_cap)
        if betas:
            gamma[:, r] = betas[min(picks[r], len(betas)) - 1]
    beta, intercept = st.coefficients(gamma)
    return _finish("plsr", X, Y, squeeze, beta, intercept, ddof, selections)


# ---------------------------------------------------------------------------
# factor parsimony


def fit_factor_parsimony(X, y, n_factor_cols: int, *, ddof: int = 1) -> RegressionFit:
    """Least squares on the leading factor columns, zeros elsewhere.

    The first n_factor_cols columns of X are taken to be factors; the
    remaining predictors receive coefficient exactly 0.  The usable
    factor count is clamped to n - 2 so a residual degree of freedom
    remains.  Multi-response residual covariance is reported diagonal,
    matching the classical factor-model assumption of uncorrelated
    idiosyncratic terms.  Raises RankDeficient when the factor block is
    collinear.
    """
    X, Y, squeeze = _as_xy(X, y)
    n, p = X.shape
    K = int(n_factor_cols)
    if not 0 <= K <= p:
        raise ValueError(f"n_factor_cols must lie in 0..{p}")
    use = min(K, max(n - 2, 0))
    if use == 0:
        return _intercept_only("factor-parsimony", X, Y, squeeze, ddof)
    coefs = _ols_solve(np.column_stack([np.ones(n), X[:, :use]]), Y)
    beta = np.zeros((p, Y.shape[1]))
    beta[:use] = coefs[1:]
    return _finish("factor-parsimony", X, Y, squeeze, beta, coefs[0], ddof, [],
                   diagonal_cov=True)


# ---------------------------------------------------------------------------
# public cross-validation entry point


def _cv_setup(method: str, X: np.ndarray, Y: np.ndarray):
    n = X.shape[0]
    st = _Standardizer(X, Y)
    p_eff = st.Xs.shape[1]
    if p_eff == 0:
        raise ValueError("no varying predictor columns to tune over")
    if method == "ridge":
        grid = _ridge_grid(n)
        return grid, _ridge_factory(grid)
    if method in ("lasso", "lar"):
        return _LARS_POSITIONS.copy(), _lars_factory(method)
    if method == "stepwise":
        k_grid = np.arange(0, min(p_eff, max(n - 2, 0)) + 1)
        return k_grid.astype(float), _stepwise_factory(k_grid)
    if method == "pcr":
        k_grid = np.arange(1, min(p_eff, n - 2) + 1)
    elif method == "plsr":
        k_grid = np.arange(1, min(p_eff, n - 2) + 1)
    else:
        raise ValueError(f"no cross-validation grid for method {method!r}")
    if k_grid.size == 0:
        raise ValueError("sample too small to tune a component count")
    factory = _pcr_factory(k_grid) if method == "pcr" else _pls_factory(k_grid)
    return k_grid.astype(float), factory


def cross_validate(method: str, X, y, cv: CvSpec | None = None):
    """Score one method's hyperparameter grid on a single response.

    Returns (chosen_value, CvCurve).  The curve's grid is ordered with
    the most parsimonious setting first (largest ridge penalty,
    smallest component/step count, null end of the lasso path), so tie
    scores resolve toward the smaller model.
    """
    X, Y, squeeze = _as_xy(X, y)
    if not squeeze:
        raise ValueError("cross_validate expects a single response")
    cv = cv or CvSpec()
    rule = cv.rule or _DEFAULT_RULE.get(method)
    if rule is None:
        raise ValueError(f"method {method!r} has no tunable hyperparameter")
    grid, factory = _cv_setup(method, X, Y)
    mean, se = _cv_mse(factory, X, Y, cv, len(grid))
    chosen = _select_index(mean[0], se[0], rule)
    curve = CvCurve(
        grid=np.asarray(grid, dtype=float),
        mean_score=mean[0],
        se_score=se[0],
        chosen_index=chosen,
        rule=rule,
    )
    return float(np.asarray(grid, dtype=float)[chosen]), curve
