"""Shared builders for test panels."""

import numpy as np

from monocov import validate_and_order


def monotone_grid(rng, m, n, min_len=2, distinct=False):
    """Random grid with NaN suffixes forming a monotone pattern.

    Column 0 spans all n rows.  With distinct=True every column gets a
    strictly shorter history than the one before it.
    """
    grid = rng.normal(size=(n, m))
    lengths = [n]
    for _ in range(1, m):
        prev = lengths[-1]
        if distinct:
            nxt = max(prev - max(1, rng.integers(1, 4)), min_len)
        else:
            nxt = int(rng.integers(min_len, prev + 1))
        lengths.append(nxt)
    for j, nj in enumerate(lengths):
        grid[nj:, j] = np.nan
    return grid, lengths


def monotone_panel(rng, m, n, **kw):
    grid, _ = monotone_grid(rng, m, n, **kw)
    return validate_and_order(grid)


def spd_matrix(rng, m, jitter=0.5):
    """Random symmetric positive definite matrix."""
    A = rng.normal(size=(m, m))
    return A @ A.T + jitter * np.eye(m)


def standardized(X, y):
    """Center y, center and unit-sd-scale X, dropping nothing."""
    Xc = X - X.mean(axis=0)
    sd = Xc.std(axis=0, ddof=1)
    return Xc / sd, y - y.mean()


def lasso_kkt_violation(Xs, yc, thresholds, coefs):
    """Worst KKT violation over the knots of a lasso path.

    Returns (bound, active): how far any gradient exceeds the penalty
    level, and how far active-coordinate gradients stray from it.
    """
    worst_bound = 0.0
    worst_active = 0.0
    for lam, g in zip(thresholds, coefs):
        grad = Xs.T @ (yc - Xs @ g)
        worst_bound = max(worst_bound, np.abs(grad).max() - lam)
        on = np.flatnonzero(g)
        if on.size:
            worst_active = max(
                worst_active, np.abs(np.abs(grad[on]) - lam).max()
            )
    return worst_bound, worst_active
