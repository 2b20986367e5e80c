"""Standard errors and normality diagnostics for replicate batches."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

JACKKNIFE_BLOCKS = 100
MIN_NORMALITY_SAMPLES = 1000
JB_PVALUE_FLOOR = 0.01
KS_COEFFICIENT = 1.63


def block_bounds(size: int, blocks: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, size, blocks + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def jackknife(
    statistic: Callable[[np.ndarray], np.ndarray], data: np.ndarray, blocks: int = JACKKNIFE_BLOCKS
) -> tuple[np.ndarray, np.ndarray]:
    """Delete-a-block jackknife over contiguous replicate blocks.

    ``statistic`` maps a ``(R', ...)`` slice of ``data`` to a scalar or array.
    Returns the full-sample value and its standard error.
    """
    data = np.asarray(data)
    full = np.asarray(statistic(data), dtype=np.float64)
    bounds = block_bounds(data.shape[0], blocks)
    if len(bounds) < 2:
        raise ValueError("jackknife needs at least two blocks")
    leave_out = np.stack(
        [np.asarray(statistic(np.concatenate([data[:a], data[b:]])), dtype=np.float64) for a, b in bounds]
    )
    g = len(bounds)
    se = np.sqrt((g - 1) / g * np.sum((leave_out - leave_out.mean(axis=0)) ** 2, axis=0))
    return full, se


def zscore(estimate: float, target: float, stderr: float) -> float:
    diff = estimate - target
    if stderr > 0:
        return diff / stderr
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def standardized_moments(samples: np.ndarray) -> tuple[float, float]:
    """Sample skewness and excess kurtosis (biased moment ratios)."""
    x = np.asarray(samples, dtype=np.float64)
    c = x - x.mean()
    m2 = np.mean(c**2)
    if m2 == 0:
        return 0.0, 0.0
    return float(np.mean(c**3) / m2**1.5), float(np.mean(c**4) / m2**2 - 3.0)


def ks_distance_normal(samples: np.ndarray, sigma: float) -> float:
    """Kolmogorov-Smirnov distance between the sample ECDF and N(0, sigma^2)."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    r = x.shape[0]
    cdf = ndtr(x / sigma)
    upper = np.arange(1, r + 1) / r - cdf
    lower = cdf - np.arange(0, r) / r
    return float(max(upper.max(), lower.max()))


@dataclass(frozen=True)
class NormalityVerdict:
    samples: int
    sigma: float
    skewness: float
    skewness_z: float
    excess_kurtosis: float
    kurtosis_z: float
    jarque_bera: float
    jb_pvalue: float
    ks_distance: float
    ks_threshold: float

    @property
    def passed(self) -> bool:
        return self.jb_pvalue >= JB_PVALUE_FLOOR and self.ks_distance <= self.ks_threshold


def normality_verdict(samples, sigma_theory: float) -> NormalityVerdict:
    """Jarque-Bera and KS checks of ``samples`` against N(0, sigma_theory^2).

    ``sigma_theory`` is a standard deviation.  Passes iff the JB p-value is
    at least 0.01 and the KS distance is at most ``1.63 / sqrt(R)``.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    r = x.shape[0]
    if r < MIN_NORMALITY_SAMPLES:
        raise ValueError(f"normality verdict needs >= {MIN_NORMALITY_SAMPLES} samples, got {r}")
    if not sigma_theory > 0:
        raise ValueError(f"sigma_theory must be positive, got {sigma_theory}")
    skew, kurt = standardized_moments(x)
    jb = r / 6.0 * (skew**2 + kurt**2 / 4.0)
    return NormalityVerdict(
        samples=r,
        sigma=float(sigma_theory),
        skewness=skew,
        skewness_z=skew / math.sqrt(6.0 / r),
        excess_kurtosis=kurt,
        kurtosis_z=kurt / math.sqrt(24.0 / r),
        jarque_bera=jb,
        # chi-square with 2 degrees of freedom has survival function exp(-x/2)
        jb_pvalue=math.exp(-jb / 2.0),
        ks_distance=ks_distance_normal(x, sigma_theory),
        ks_threshold=KS_COEFFICIENT / math.sqrt(r),
    )
