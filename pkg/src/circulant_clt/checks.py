"""Joint-moment (Wick) and odd/even-order consistency checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .combinatorics import DEGENERATE_SIGMA, _sigma_extended
from .experiment import ExperimentConfig, SigmaFn, cached_traces, covariance_estimates
from .laws import get_law
from .stats import jackknife, zscore

WICK_TOLERANCE = 4.0
PARITY_TOLERANCE = 3.0


def pairings(items: Sequence[int]) -> list[list[tuple[int, int]]]:
    """All perfect matchings of ``items`` (as index pairs)."""
    idx = list(range(len(items)))
    if len(idx) % 2:
        return []

    def rec(rest):
        if not rest:
            yield []
            return
        a = rest[0]
        for i in range(1, len(rest)):
            b = rest[i]
            for tail in rec(rest[1:i] + rest[i + 1 :]):
                yield [(a, b)] + tail

    return list(rec(idx))


def wick_target(powers: Sequence[int], fourth_moment: float, sigma_fn: Optional[SigmaFn] = None) -> float:
    """Gaussian joint moment ``E[w_{p_1} ... w_{p_l}]`` from the limiting covariances."""
    sigma_fn = sigma_fn or _sigma_extended
    total = 0.0
    for match in pairings(powers):
        term = 1.0
        for a, b in match:
            term *= sigma_fn(powers[a], powers[b], fourth_moment)
        total += term
    return total


def joint_moment(columns: np.ndarray, n: int) -> tuple[float, float]:
    """Empirical ``E[prod_i w_i]`` from raw trace columns, with jackknife SE.

    Every jackknife subsample is re-centred by its own mean, matching the
    empirical centring of the full batch.
    """
    scale = math.sqrt(n) ** columns.shape[1]

    def moment(sub):
        c = sub - sub.mean(axis=0)
        return np.mean(np.prod(c, axis=1)) / scale

    est, se = jackknife(moment, columns)
    return float(est), float(se)


@dataclass(frozen=True)
class WickReport:
    n: int
    powers: tuple[int, ...]
    estimate: float
    stderr: float
    target: float
    zscore: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.zscore) <= self.tolerance


def wick_joint_check(
    cfg: ExperimentConfig,
    powers: Sequence[int],
    tolerance: float = WICK_TOLERANCE,
    sigma_fn: Optional[SigmaFn] = None,
) -> list[WickReport]:
    """Compare ``E[w_{p_1} ... w_{p_l}]`` (``l`` in {3, 4}) with its Wick value, per order in ``cfg``."""
    powers = tuple(int(p) for p in powers)
    if len(powers) not in (3, 4):
        raise ValueError(f"joint moments of order {len(powers)} are not supported (use 3 or 4)")
    if min(powers) < 2:
        raise ValueError(f"powers must be >= 2, got {powers}")
    law = get_law(cfg.law)
    target = wick_target(powers, law.fourth_moment, sigma_fn)
    reports = []
    for n in cfg.n_list:
        traces = cached_traces(cfg.law, n, max(powers), cfg.replicates, cfg.seed)
        est, se = joint_moment(traces[:, [p - 1 for p in powers]], n)
        reports.append(WickReport(n, powers, est, se, target, zscore(est, target, se), tolerance))
    return reports


@dataclass(frozen=True)
class OrderEstimate:
    n: int
    estimate: float
    stderr: float
    theory: float
    zscore: float


@dataclass(frozen=True)
class ParityReport:
    p: int
    q: int
    tolerance: float
    estimates: tuple[OrderEstimate, ...]
    # (odd n, even n, |difference|, allowed difference)
    comparisons: tuple[tuple[int, int, float, float], ...]

    @property
    def theory_agrees(self) -> bool:
        return all(abs(e.zscore) <= self.tolerance for e in self.estimates)

    @property
    def orders_agree(self) -> bool:
        return all(diff <= bound for _, _, diff, bound in self.comparisons)

    @property
    def passed(self) -> bool:
        return self.theory_agrees and self.orders_agree


def parity_consistency_check(
    cfg: ExperimentConfig,
    p: int,
    q: int,
    tolerance: float = PARITY_TOLERANCE,
    sigma_fn: Optional[SigmaFn] = None,
) -> ParityReport:
    """Check that odd and even orders give the same ``cov(w_p, w_q)``, and that it matches the limit."""
    if min(p, q) < 2:
        raise ValueError(f"powers must be >= 2, got ({p}, {q})")
    odd = [n for n in cfg.n_list if n % 2]
    even = [n for n in cfg.n_list if n % 2 == 0]
    if not odd or not even:
        raise ValueError(f"n_list needs both an odd and an even order, got {list(cfg.n_list)}")
    theory = (sigma_fn or _sigma_extended)(p, q, get_law(cfg.law).fourth_moment)
    by_n = {}
    for n in cfg.n_list:
        traces = cached_traces(cfg.law, n, max(p, q), cfg.replicates, cfg.seed)
        cov, se = covariance_estimates(traces[:, [p - 1, q - 1]], n)
        est, err = float(cov[0, 1]), float(se[0, 1])
        by_n[n] = OrderEstimate(n, est, err, theory, zscore(est, theory, err))
    comparisons = []
    for a in odd:
        for b in even:
            diff = abs(by_n[a].estimate - by_n[b].estimate)
            # the absolute floor keeps round-off from failing degenerate (zero-variance) cases
            bound = tolerance * (by_n[a].stderr + by_n[b].stderr) + DEGENERATE_SIGMA
            comparisons.append((a, b, diff, bound))
    return ParityReport(p, q, tolerance, tuple(by_n[n] for n in cfg.n_list), tuple(comparisons))
