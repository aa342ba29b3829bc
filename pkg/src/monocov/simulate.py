"""Synthetic panels with known distributional truth.

A trial draws a mean vector and covariance matrix at random, samples a
complete data grid from a multivariate normal or Student-t with those
parameters, and then masks trailing rows column by column so the
observed pattern is monotone.  All draws are reproducible from a
single integer seed; independent streams for the parameter draw, the
sample, the missingness pattern, and the tail-weight draw are derived
by salting that seed, so e.g. changing the distribution does not
perturb the masking pattern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .panel import MonotoneOrder, ReturnPanel, validate_and_order

__all__ = [
    "SimSpec",
    "TrialData",
    "rand_mvn_params",
    "sample",
    "rmono",
    "apply_monotone",
    "nu_draw",
    "generate_trial",
    "default_labels",
]

_SALT_PARAMS = 1
_SALT_SAMPLE = 2
_SALT_MASK = 3
_SALT_NU = 4


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, salt)))


@dataclass(frozen=True)
class SimSpec:
    """Settings for one synthetic trial.

    nu is the Student-t tail weight; None draws it as 1 plus an
    exponential with rate exp_rate (mean 3 at the default rate), so
    heavy and nearly-normal tails both occur.  wishart_df defaults to
    m + 3, the smallest integer order giving the inverse-Wishart draw
    a finite second moment.
    """

    m: int
    n: int
    distribution: str = "mvn"
    nu: float | None = None
    seed: int = 0
    wishart_df: int | None = None
    wishart_scale: float = 1.0
    exp_rate: float = 0.5

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 2:
            raise ValueError("need m >= 1 columns and n >= 2 rows")
        if self.distribution not in ("mvn", "mvt"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.nu is not None and not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.wishart_scale <= 0 or self.exp_rate <= 0:
            raise ValueError("wishart_scale and exp_rate must be positive")


@dataclass(frozen=True)
class TrialData:
    """One generated trial: the truth, the complete grid, and the panel."""

    mean: np.ndarray
    covariance: np.ndarray
    complete: np.ndarray
    lengths: np.ndarray
    panel: ReturnPanel
    order: MonotoneOrder
    nu: float | None


def rand_mvn_params(m: int, seed: int = 0, df: int | None = None,
                    scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Draw a mean vector and an inverse-Wishart covariance matrix.

    The covariance has scale matrix ``scale * I`` and ``df`` degrees
    of freedom (default m + 3), so its expectation is
    ``scale / (df - m - 1) * I``.  Sampled via the Bartlett
    decomposition of the underlying Wishart draw, whose triangular
    factor is inverted directly.
    """
    if df is None:
        df = m + 3
    if df <= m + 1:
        raise ValueError("df must exceed m + 1 for a finite mean")
    rng = _rng(seed, _SALT_PARAMS)
    mu = rng.standard_normal(m)
    A = np.zeros((m, m))
    for i in range(m):
        A[i, i] = np.sqrt(rng.chisquare(df - i))
        A[i, :i] = rng.standard_normal(i)
    # Wishart(df, I/scale) factor; the inverse Wishart is its inverse
    T = A / np.sqrt(scale)
    Tinv = solve_triangular(T, np.eye(m), lower=True)
    sigma = Tinv.T @ Tinv
    return mu, 0.5 * (sigma + sigma.T)


def sample(mu: np.ndarray, sigma: np.ndarray, n: int, *,
           distribution: str = "mvn", nu: float | None = None,
           seed: int = 0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw n rows from the multivariate normal or Student-t.

    The Student-t variant scales each normal row by an independent
    sqrt(nu / chi-square(nu)) mixing weight; its covariance is
    sigma * nu / (nu - 2) when nu > 2 and undefined otherwise.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    m = mu.shape[0]
    if rng is None:
        rng = _rng(seed, _SALT_SAMPLE)
    L = np.linalg.cholesky(sigma)
    z = rng.standard_normal((n, m)) @ L.T
    if distribution == "mvn":
        return mu + z
    if distribution == "mvt":
        if nu is None or not nu > 0:
            raise ValueError("mvt sampling needs nu > 0")
        w = nu / rng.chisquare(nu, size=n)
        return mu + z * np.sqrt(w)[:, None]
    raise ValueError(f"unknown distribution {distribution!r}")


def rmono(m: int, n: int, seed: int = 0) -> np.ndarray:
    """Draw non-increasing column lengths for a monotone pattern.

    The first column spans all n rows; each later length is uniform on
    {2, ..., previous length}, so histories shrink geometrically on
    average and every column keeps at least two rows.
    """
    if n < 2:
        raise ValueError("need n >= 2 rows")
    rng = _rng(seed, _SALT_MASK)
    lengths = np.empty(m, dtype=int)
    lengths[0] = n
    for j in range(1, m):
        lengths[j] = rng.integers(2, lengths[j - 1] + 1)
    return lengths


def apply_monotone(grid: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Mask each column below its length with NaN.  Returns a copy."""
    out = np.array(grid, dtype=float)
    n = out.shape[0]
    for j, nj in enumerate(lengths):
        if not 1 <= nj <= n:
            raise ValueError(f"length {nj} out of range for column {j + 1}")
        out[int(nj):, j] = np.nan
    return out


def nu_draw(seed: int = 0, rate: float = 0.5) -> float:
    """Draw the Student-t tail weight: 1 + exponential(rate)."""
    rng = _rng(seed, _SALT_NU)
    return 1.0 + float(rng.exponential(scale=1.0 / rate))


def default_labels(m: int) -> tuple[str, ...]:
    return tuple(f"V{j + 1}" for j in range(m))


def generate_trial(spec: SimSpec) -> TrialData:
    """Draw truth, sample a complete grid, and mask it monotonically."""
    mu, sigma = rand_mvn_params(spec.m, spec.seed, spec.wishart_df,
                                spec.wishart_scale)
    nu = None
    if spec.distribution == "mvt":
        nu = spec.nu if spec.nu is not None else nu_draw(spec.seed, spec.exp_rate)
    full = sample(mu, sigma, spec.n, distribution=spec.distribution,
                  nu=nu, seed=spec.seed)
    lengths = rmono(spec.m, spec.n, spec.seed)
    masked = apply_monotone(full, lengths)
    panel, order = validate_and_order(masked, default_labels(spec.m))
    return TrialData(
        mean=mu,
        covariance=sigma,
        complete=full,
        lengths=lengths,
        panel=panel,
        order=order,
        nu=nu,
    )
