"""Correlation coefficients, correlation-difference significance tests, and
the single-feature regression comparison used by the evaluation pipeline.

Two significance tests are provided. The dependent-overlapping test
(Steiger-style z with Fisher transforms and the back-transformed mean
correlation) applies when two correlations share the human signal on the
same stimuli, e.g. a tokenizer metric against the character-length baseline.
The independent test applies across datasets. Every result names the test
it came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import StatsError

TEST_DEPENDENT = "dependent-overlapping"
TEST_INDEPENDENT = "independent-fisher"

# atanh diverges at |r| = 1; correlations at or beyond this magnitude are
# rejected as degenerate input.
MAX_ABS_R = 0.999999

MIN_N_OBS = 4


@dataclass(frozen=True)
class PairedSample:
    """Metric values paired with human-signal values for one report cell."""

    x: np.ndarray
    y: np.ndarray

    @property
    def n_obs(self) -> int:
        return len(self.x)


def paired(x: Sequence[float], y: Sequence[float]) -> PairedSample:
    """Validate and wrap a paired sample: equal lengths, at least
    MIN_N_OBS observations, no non-finite entries."""
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    if ax.ndim != 1 or ay.ndim != 1 or len(ax) != len(ay):
        raise StatsError(f"paired sample needs two equal-length vectors, "
                         f"got shapes {ax.shape} and {ay.shape}")
    if len(ax) < MIN_N_OBS:
        raise StatsError(f"paired sample needs at least {MIN_N_OBS} observations, got {len(ax)}")
    if not (np.isfinite(ax).all() and np.isfinite(ay).all()):
        raise StatsError("paired sample contains non-finite entries")
    return PairedSample(x=ax, y=ay)


def pearson(sample: PairedSample) -> float:
    """Product-moment correlation coefficient."""
    dx = sample.x - sample.x.mean()
    dy = sample.y - sample.y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx <= 0.0 or syy <= 0.0:
        raise StatsError("correlation undefined: zero variance in x or y")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _midranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=float)
    sv = v[order]
    i = 0
    n = len(v)
    while i < n:
        j = i
        while j + 1 < n and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(sample: PairedSample) -> float:
    """Pearson correlation of midrank-transformed data."""
    return pearson(PairedSample(x=_midranks(sample.x), y=_midranks(sample.y)))


@dataclass(frozen=True)
class SignificanceResult:
    """Outcome of a correlation-difference test. For the independent test
    n_obs is the (n1, n2) pair and r12 is None."""

    statistic: float
    p_value: float
    test: str
    r1: float
    r2: float
    n_obs: Union[int, tuple[int, int]]
    r12: Optional[float] = None

    def as_dict(self) -> dict:
        n = list(self.n_obs) if isinstance(self.n_obs, tuple) else self.n_obs
        return {"statistic": self.statistic, "p_value": self.p_value, "test": self.test,
                "r1": self.r1, "r2": self.r2, "n_obs": n, "r12": self.r12}


def two_tailed_p(z: float) -> float:
    """2 * (1 - Phi(|z|)) via the complementary error function, which keeps
    full precision in the tails."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def _check_r(r: float, name: str) -> None:
    if not math.isfinite(r):
        raise StatsError(f"{name} is non-finite")
    if abs(r) >= MAX_ABS_R:
        raise StatsError(f"{name}={r} too close to +/-1: Fisher transform diverges")


def compare_dependent_correlations(r1: float, r2: float, r12: float,
                                   n_obs: int) -> SignificanceResult:
    """Test r1 against r2 when both were computed on the same sample and
    share one variable, with r12 the correlation between the two non-shared
    variables. Steiger-style z: Fisher-transform both correlations and scale
    their difference by a covariance term built from the back-transformed
    mean correlation. Two-tailed p from the standard normal."""
    _check_r(r1, "r1")
    _check_r(r2, "r2")
    _check_r(r12, "r12")
    if n_obs < MIN_N_OBS:
        raise StatsError(f"dependent test needs n_obs >= {MIN_N_OBS}, got {n_obs}")
    z1 = math.atanh(r1)
    z2 = math.atanh(r2)
    rbar = math.tanh((z1 + z2) / 2.0)
    rbar2 = rbar * rbar
    cov = (r12 * (1.0 - 2.0 * rbar2) - 0.5 * rbar2 * (1.0 - 2.0 * rbar2 - r12 * r12)) \
        / ((1.0 - rbar2) ** 2)
    denom = 2.0 - 2.0 * cov
    if denom <= 1e-12:
        # the pooled-covariance approximation collapses when the two
        # correlations are this far apart at this magnitude; refuse rather
        # than fabricate a p-value
        raise StatsError("dependent test degenerate: pooled covariance estimate "
                         f"out of range (r1={r1:.4f}, r2={r2:.4f}, r12={r12:.4f})")
    z = (z1 - z2) * math.sqrt((n_obs - 3) / denom)
    return SignificanceResult(statistic=z, p_value=two_tailed_p(z), test=TEST_DEPENDENT,
                              r1=r1, r2=r2, n_obs=n_obs, r12=r12)


def compare_independent_correlations(r1: float, n1: int, r2: float,
                                     n2: int) -> SignificanceResult:
    """Fisher z test for correlations from two independent samples:
    z = (atanh r1 - atanh r2) / sqrt(1/(n1-3) + 1/(n2-3))."""
    _check_r(r1, "r1")
    _check_r(r2, "r2")
    if n1 < MIN_N_OBS or n2 < MIN_N_OBS:
        raise StatsError(f"independent test needs both n >= {MIN_N_OBS}, got {n1}, {n2}")
    se = math.sqrt(1.0 / (n1 - 3) + 1.0 / (n2 - 3))
    z = (math.atanh(r1) - math.atanh(r2)) / se
    return SignificanceResult(statistic=z, p_value=two_tailed_p(z), test=TEST_INDEPENDENT,
                              r1=r1, r2=r2, n_obs=(n1, n2))


def minmax_scale(v: Sequence[float]) -> np.ndarray:
    """(v - min) / (max - min): endpoints map exactly to 0 and 1."""
    a = np.asarray(v, dtype=float)
    if a.size == 0 or not np.isfinite(a).all():
        raise StatsError("minmax_scale needs a non-empty finite vector")
    lo = a.min()
    hi = a.max()
    if hi <= lo:
        raise StatsError("minmax_scale undefined for a constant vector")
    return (a - lo) / (hi - lo)


@dataclass(frozen=True)
class RegressionResult:
    """Single-feature OLS evaluated on a held-out split."""

    slope: float
    intercept: float
    mse: float
    explained_variance: float
    split_seed: int
    n_train: int
    n_test: int

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "mse": self.mse,
                "explained_variance": self.explained_variance,
                "split_seed": self.split_seed,
                "n_train": self.n_train, "n_test": self.n_test}


def fit_ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Closed-form ordinary least squares for one feature plus intercept."""
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx <= 0.0:
        raise StatsError("degenerate fit: feature has zero variance")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    return slope, intercept


def linreg_holdout(x: Sequence[float], y: Sequence[float],
                   train_fraction: float = 0.8, seed: int = 0) -> RegressionResult:
    """Fit OLS on a seeded random train split and report MSE and explained
    variance EV = 1 - Var(y_test - yhat) / Var(y_test) on the held-out
    split. Identical seeds give identical splits and results."""
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    if ax.ndim != 1 or ay.ndim != 1 or len(ax) != len(ay):
        raise StatsError("x and y must be equal-length vectors")
    n = len(ax)
    if n < 10:
        raise StatsError(f"regression needs at least 10 observations, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise StatsError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(round(n * train_fraction))
    n_train = min(max(n_train, 2), n - 2)
    train, test = perm[:n_train], perm[n_train:]
    slope, intercept = fit_ols(ax[train], ay[train])
    pred = slope * ax[test] + intercept
    resid = ay[test] - pred
    mse = float(np.mean(resid ** 2))
    var_y = float(np.var(ay[test]))
    if var_y <= 0.0:
        raise StatsError("degenerate split: constant targets in the test fold")
    ev = 1.0 - float(np.var(resid)) / var_y
    return RegressionResult(slope=slope, intercept=intercept, mse=mse,
                            explained_variance=ev, split_seed=seed,
                            n_train=len(train), n_test=len(test))
