"""Small statistics toolkit: slope fits with robust errors, bootstrap
confidence intervals, batch-mean standard errors, and goodness-of-fit helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class InsufficientDataError(ValueError):
    """An estimator was asked to run on too few samples."""


@dataclass(frozen=True)
class FitResult:
    """A fitted line with a 95% confidence interval on the slope."""

    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    stderr: float
    n_points: int
    residual_std: float
    degenerate: bool = False

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci95": [self.ci_low, self.ci_high],
            "stderr": self.stderr,
            "n_points": self.n_points,
            "residual_std": self.residual_std,
            "degenerate": self.degenerate,
        }


def degenerate_fit(n_points: int = 0) -> FitResult:
    nan = float("nan")
    return FitResult(nan, nan, nan, nan, nan, n_points, nan, degenerate=True)


def ols_line(x: np.ndarray, y: np.ndarray) -> FitResult:
    """OLS line y ~ a + b x with heteroskedasticity-robust (HC1) CI95."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        raise InsufficientDataError("need at least 2 points for a line fit")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise InsufficientDataError("degenerate abscissa: all x equal")
    slope = float(xc @ y) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    if n > 2:
        hc1 = n / (n - 2) * float((xc**2) @ (resid**2)) / sxx**2
        se = math.sqrt(hc1)
        resid_std = float(np.sqrt(resid @ resid / (n - 2)))
    else:
        se = 0.0
        resid_std = 0.0
    half = 1.959963984540054 * se
    return FitResult(slope, intercept, slope - half, slope + half, se, n, resid_std)


def fit_loglog(x: np.ndarray, y: np.ndarray) -> FitResult:
    """OLS on (log x, log y); raises on nonpositive values; needs >= 4 points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 4:
        raise InsufficientDataError(f"need at least 4 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit requires strictly positive values")
    return ols_line(np.log(x), np.log(y))


def batch_means(values: np.ndarray, n_batches: int) -> np.ndarray:
    """Means of contiguous, nonoverlapping batches along axis 0."""
    values = np.asarray(values, dtype=np.float64)
    b = max(2, min(n_batches, values.shape[0]))
    return np.stack([chunk.mean(axis=0) for chunk in np.array_split(values, b)])


def bootstrap_ci(
    samples: np.ndarray,
    statistic,
    n_boot: int = 200,
    seed: int = 0,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap CI of a scalar statistic of a 1-d sample."""
    samples = np.asarray(samples)
    rng = np.random.default_rng(seed)
    n = samples.shape[0]
    reps = np.empty(n_boot)
    for i in range(n_boot):
        reps[i] = statistic(samples[rng.integers(0, n, size=n)])
    lo = (1 - level) / 2 * 100
    return float(np.percentile(reps, lo)), float(np.percentile(reps, 100 - lo))


def ks_gaussian(sample: np.ndarray, variance: float) -> tuple[float, float]:
    """One-sample KS statistic and p-value against N(0, variance)."""
    sample = np.asarray(sample, dtype=np.float64)
    if variance <= 0:
        raise ValueError("variance must be positive for the KS comparison")
    res = sps.kstest(sample, "norm", args=(0.0, math.sqrt(variance)))
    return float(res.statistic), float(res.pvalue)


def empirical_tv(counts_a: dict, counts_b: dict) -> float:
    """Total-variation distance between two empirical distributions given as
    value -> count mappings."""
    na = sum(counts_a.values())
    nb = sum(counts_b.values())
    keys = set(counts_a) | set(counts_b)
    return 0.5 * sum(abs(counts_a.get(k, 0) / na - counts_b.get(k, 0) / nb) for k in keys)
