"""Pointwise moment estimation and percentile-bootstrap confidence intervals.

Moments accumulate over samples in fixed index order with Neumaier
compensation, so results are reproducible to the last bit no matter how the
sample evaluations were scheduled. The bootstrap is vectorized over
resamples via resample-count matrices (deterministic given its seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import generator_for

__all__ = [
    "MomentEstimate",
    "estimate_moments",
    "bootstrap_ci",
]


@dataclass
class MomentEstimate:
    """Pointwise mean/std fields with optional bootstrap intervals.

    ci_mean/ci_std are (lo, hi) arrays at the stated confidence level; they
    always contain the point estimates. n_samples is the sample count the
    estimate came from (0 for deterministic methods).
    """

    mean: np.ndarray
    std: np.ndarray
    n_samples: int
    ci_mean: tuple | None = None
    ci_std: tuple | None = None
    level: float | None = None

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std shapes differ")
        if np.any(self.std < 0):
            raise ValueError("negative std")


def _compensated_sum(terms: np.ndarray) -> np.ndarray:
    """Neumaier-compensated sum over axis 0, in index order."""
    total = np.zeros(terms.shape[1:], dtype=float)
    comp = np.zeros_like(total)
    for j in range(terms.shape[0]):
        x = terms[j]
        t = total + x
        # whichever addend was smaller in magnitude lost digits; recover them
        comp += np.where(np.abs(total) >= np.abs(x), (total - t) + x, (x - t) + total)
        total = t
    return total + comp


def estimate_moments(outputs: np.ndarray) -> MomentEstimate:
    """Pointwise sample mean and (n-1)-divisor std over axis 0.

    outputs: (n_samples, ...) stacked sample fields, n_samples >= 2 (a single
    sample leaves the std undefined and raises).
    """
    outputs = np.asarray(outputs, dtype=float)
    n = outputs.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples for mean/std, got {n}")
    mean = _compensated_sum(outputs) / n
    var = _compensated_sum((outputs - mean) ** 2) / (n - 1)
    return MomentEstimate(mean=mean, std=np.sqrt(np.maximum(var, 0.0)), n_samples=n)


def _resample_stats(
    outputs: np.ndarray, counts: np.ndarray, estimator: str
) -> np.ndarray:
    """Estimator value per bootstrap resample, from resample counts.

    outputs: (n, m) flattened samples; counts: (B, n) multiplicities per
    resample. Data are centered globally first so the variance update is not
    cancellation-dominated.
    """
    n = outputs.shape[0]
    center = outputs.mean(axis=0)
    y = outputs - center
    s1 = counts @ y
    if estimator == "mean":
        return s1 / n + center
    s2 = counts @ (y * y)
    var = (s2 - (s1 * s1) / n) / (n - 1)
    return np.sqrt(np.maximum(var, 0.0))


def bootstrap_ci(
    outputs: np.ndarray,
    estimator: str = "mean",
    level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> tuple:
    """Percentile-bootstrap interval for the pointwise mean or std.

    Returns (lo, hi) arrays shaped like one sample. Interval endpoints are
    the empirical (1-level)/2 and (1+level)/2 quantiles over n_resamples
    with-replacement resamples, widened if needed so the interval contains
    the plug-in point estimate.
    """
    outputs = np.asarray(outputs, dtype=float)
    if estimator not in ("mean", "std"):
        raise ValueError(f"estimator must be 'mean' or 'std', got {estimator!r}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    n = outputs.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples to bootstrap, got {n}")
    shape = outputs.shape[1:]
    flat = outputs.reshape(n, -1)
    rng = generator_for(seed, purpose=1)
    idx = rng.integers(0, n, size=(n_resamples, n))
    counts = np.zeros((n_resamples, n))
    rows = np.repeat(np.arange(n_resamples), n)
    np.add.at(counts, (rows, idx.reshape(-1)), 1.0)
    stats = _resample_stats(flat, counts, estimator)
    alpha = 0.5 * (1.0 - level)
    lo = np.quantile(stats, alpha, axis=0)
    hi = np.quantile(stats, 1.0 - alpha, axis=0)
    if estimator == "mean":
        point = flat.mean(axis=0)
    else:
        point = flat.std(axis=0, ddof=1)
    lo = np.minimum(lo, point)
    hi = np.maximum(hi, point)
    return lo.reshape(shape), hi.reshape(shape)


def attach_cis(
    est: MomentEstimate,
    outputs: np.ndarray,
    level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> MomentEstimate:
    """Fill ci_mean/ci_std on an estimate from the same output stack."""
    est.ci_mean = bootstrap_ci(outputs, "mean", level, n_resamples, seed)
    est.ci_std = bootstrap_ci(outputs, "std", level, n_resamples, seed)
    est.level = level
    return est
