"""Seeded replicate engine for the fluctuation statistics ``w_p`` and ``w_Q``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .combinatorics import DEGENERATE_SIGMA, bilinear_sigma, polynomial_degree
from .laws import U64, get_law
from .spectral import eigenvalues_batch, fluctuation_statistic, trace_powers_batch
from .stats import (
    JB_PVALUE_FLOOR,
    MIN_NORMALITY_SAMPLES,
    NormalityVerdict,
    jackknife,
    normality_verdict,
    standardized_moments,
    zscore,
)

CHUNK = 500
SIGMA_TOLERANCE = 3.0
MAX_WORK = 5 * 10**12
RAW_MOMENT_ORDERS = range(1, 7)
CACHE_MIN_POWER = 5

SigmaFn = Callable[[int, int, float], float]


def _format_coeff(a: float) -> str:
    return "" if a == 1 else ("-" if a == -1 else f"{a:g}")


def polynomial_label(coeffs: Sequence[float]) -> str:
    terms = []
    for k, a in enumerate(coeffs, start=1):
        if a == 0:
            continue
        mono = "x" if k == 1 else f"x^{k}"
        term = _format_coeff(a) + mono
        if terms and not term.startswith("-"):
            term = "+" + term
        terms.append(term)
    return "w_Q(" + "".join(terms) + ")"


@dataclass(frozen=True)
class Statistic:
    """A centred trace functional; ``coeffs[k-1]`` multiplies ``Tr(SC_n^k)``."""

    label: str
    coeffs: tuple[float, ...]

    @classmethod
    def power(cls, p: int) -> "Statistic":
        return cls(f"w_{p}", (0.0,) * (p - 1) + (1.0,))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "Statistic":
        coeffs = tuple(float(a) for a in coeffs)
        return cls(polynomial_label(coeffs), coeffs)

    @property
    def degree(self) -> int:
        return polynomial_degree(self.coeffs)


@dataclass(frozen=True)
class ExperimentConfig:
    law: str
    n_list: tuple[int, ...]
    powers: tuple[int, ...] = ()
    polynomials: tuple[tuple[float, ...], ...] = ()
    replicates: int = 10_000
    seed: int = 0
    parallel_width: int = 1
    name: str = "experiment"

    def validate(self) -> None:
        get_law(self.law)
        if not self.n_list:
            raise ValueError("n_list is empty")
        for n in self.n_list:
            if n < 3:
                raise ValueError(f"matrix order must be >= 3, got {n}")
        for p in self.powers:
            if p < 2:
                raise ValueError(
                    f"power {p} is not allowed: powers must be >= 2 "
                    "(w_0 vanishes identically and w_1 is just X_0)"
                )
        for coeffs in self.polynomials:
            if polynomial_degree(coeffs) < 2:
                raise ValueError(f"polynomial {list(coeffs)} must have degree >= 2")
        if not self.powers and not self.polynomials:
            raise ValueError("nothing to simulate: give powers and/or polynomials")
        if self.replicates < 2:
            raise ValueError(f"replicates must be >= 2 for empirical centering, got {self.replicates}")
        if not 0 <= self.seed < U64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.parallel_width < 1:
            raise ValueError(f"parallel_width must be >= 1, got {self.parallel_width}")
        work = sum(self.replicates * (n // 2 + 1) * (n // 2 + 1) for n in self.n_list)
        if work > MAX_WORK:
            raise ValueError(f"requested work {work:.3g} exceeds budget {MAX_WORK:.3g}")

    def statistics(self) -> list[Statistic]:
        stats = [Statistic.power(p) for p in self.powers]
        stats += [Statistic.polynomial(c) for c in self.polynomials]
        return stats

    @property
    def max_power(self) -> int:
        return max(s.degree for s in self.statistics())

    def echo(self, include_width: bool = True) -> dict:
        d = asdict(self)
        d["n_list"] = list(self.n_list)
        d["powers"] = list(self.powers)
        d["polynomials"] = [list(c) for c in self.polynomials]
        if not include_width:
            d.pop("parallel_width")
        return d


def _chunk_traces(law_name: str, n: int, max_power: int, seed: int, start: int, stop: int) -> np.ndarray:
    law = get_law(law_name)
    width = n // 2 + 1
    x = np.empty((stop - start, width))
    for i, r in enumerate(range(start, stop)):
        x[i] = law.sample(seed, n, r, width)
    x /= math.sqrt(n)
    lam = eigenvalues_batch(x, n)
    return trace_powers_batch(lam, range(1, max_power + 1))


def simulate_traces(
    law: str, n: int, max_power: int, replicates: int, seed: int, parallel_width: int = 1
) -> np.ndarray:
    """``Tr(SC_n^p)`` for ``p = 1..max_power`` over ``replicates`` draws; shape ``(R, max_power)``.

    Replicates are processed in fixed chunks and reassembled in index order,
    so the output does not depend on ``parallel_width``.
    """
    bounds = [(a, min(a + CHUNK, replicates)) for a in range(0, replicates, CHUNK)]

    def work(b):
        return _chunk_traces(law, n, max_power, seed, *b)

    if parallel_width > 1:
        with ThreadPoolExecutor(max_workers=parallel_width) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return np.concatenate(parts, axis=0)


@lru_cache(maxsize=16)
def _cached(law: str, n: int, max_power: int, replicates: int, seed: int) -> np.ndarray:
    traces = simulate_traces(law, n, max_power, replicates, seed)
    traces.setflags(write=False)
    return traces


def cached_traces(law: str, n: int, max_power: int, replicates: int, seed: int) -> np.ndarray:
    """Memoized :func:`simulate_traces` (read-only result).

    Columns do not depend on how many powers were requested, so every call
    computes at least ``CACHE_MIN_POWER`` of them and shares the entry.
    """
    traces = _cached(law, n, max(max_power, CACHE_MIN_POWER), replicates, seed)
    return traces[:, :max_power]


def statistic_traces(traces: np.ndarray, stats: Sequence[Statistic]) -> np.ndarray:
    cols = []
    for s in stats:
        col = np.zeros(traces.shape[0])
        for k, a in enumerate(s.coeffs, start=1):
            if a != 0:
                col = col + a * traces[:, k - 1]
        cols.append(col)
    return np.stack(cols, axis=1)


def covariance_estimates(stat_traces: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Empirical covariance matrix of the centred statistics and its jackknife SE."""
    k = stat_traces.shape[1]

    def cov(sub):
        c = sub - sub.mean(axis=0)
        return (c.T @ c / (sub.shape[0] - 1) / n).reshape(-1)

    est, se = jackknife(cov, stat_traces)
    return est.reshape(k, k), se.reshape(k, k)


@dataclass(frozen=True)
class ResultRow:
    n: int
    statistic: str
    estimate: Optional[float]
    stderr: Optional[float]
    theory: Optional[float]
    zscore: Optional[float]
    verdict: str
    subject: str = field(default="", compare=False)

    @property
    def failed(self) -> bool:
        return self.verdict == "fail"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    normality: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return not any(r.failed for r in self.rows)

    def rows_for(self, n: int, subject: str) -> list[ResultRow]:
        return [r for r in self.rows if r.n == n and r.subject == subject]

    def row(self, n: int, statistic: str) -> ResultRow:
        for r in self.rows:
            if r.n == n and r.statistic == statistic:
                return r
        raise KeyError((n, statistic))


def _gaussian_moment(order: int, variance: float) -> float:
    if order % 2:
        return 0.0
    return math.prod(range(order - 1, 0, -2)) * variance ** (order // 2)


def _rows_for_n(
    n: int,
    stats: Sequence[Statistic],
    stat_traces: np.ndarray,
    fourth_moment: float,
    sigma_fn: Optional[SigmaFn],
    normality: dict,
) -> list[ResultRow]:
    r_count = stat_traces.shape[0]
    cov, cov_se = covariance_estimates(stat_traces, n)
    w = fluctuation_statistic(stat_traces, n)
    rows: list[ResultRow] = []
    for i, s in enumerate(stats):

        def add(*fields, subject=s.label):
            rows.append(ResultRow(n, *fields, subject=subject))

        theory = bilinear_sigma(s.coeffs, s.coeffs, fourth_moment, sigma_fn)
        est, se = float(cov[i, i]), float(cov_se[i, i])
        z = zscore(est, theory, se)
        degenerate = theory < DEGENERATE_SIGMA
        if degenerate:
            ok = abs(est) <= SIGMA_TOLERANCE * se + DEGENERATE_SIGMA
        else:
            ok = abs(z) <= SIGMA_TOLERANCE
        add(f"var({s.label})", est, se, theory, z, "pass" if ok else "fail")
        for j in range(i + 1, len(stats)):
            t = stats[j]
            ctheory = bilinear_sigma(s.coeffs, t.coeffs, fourth_moment, sigma_fn)
            cz = zscore(float(cov[i, j]), ctheory, float(cov_se[i, j]))
            add(
                f"cov({s.label},{t.label})", float(cov[i, j]), float(cov_se[i, j]),
                ctheory, cz, "pass" if abs(cz) <= SIGMA_TOLERANCE else "fail",
            )
        col = w[:, i]
        skew, kurt = standardized_moments(col)
        skew_se, kurt_se = math.sqrt(6.0 / r_count), math.sqrt(24.0 / r_count)
        add(f"skewness({s.label})", skew, skew_se, 0.0, skew / skew_se, "info")
        add(f"excess_kurtosis({s.label})", kurt, kurt_se, 0.0, kurt / kurt_se, "info")
        verdict: Optional[NormalityVerdict] = None
        # degenerate limits are judged by the variance-vanishing rule above
        if not degenerate and r_count >= MIN_NORMALITY_SAMPLES:
            verdict = normality_verdict(col, math.sqrt(theory))
        normality[(n, s.label)] = verdict
        if verdict is not None:
            add(f"jarque_bera({s.label})", verdict.jarque_bera, None, None, None, "info")
            jb_ok = verdict.jb_pvalue >= JB_PVALUE_FLOOR
            ks_ok = verdict.ks_distance <= verdict.ks_threshold
            add(f"jb_pvalue({s.label})", verdict.jb_pvalue, None, JB_PVALUE_FLOOR, None, "pass" if jb_ok else "fail")
            add(
                f"ks_distance({s.label})", verdict.ks_distance, None, verdict.ks_threshold, None,
                "pass" if ks_ok else "fail",
            )
        else:
            add(f"normality({s.label})", None, None, None, None, "skip")
        for order in RAW_MOMENT_ORDERS:
            add(
                f"moment{order}({s.label})", float(np.mean(col**order)), None,
                _gaussian_moment(order, theory), None, "info",
            )
    return rows


def run_experiment(
    cfg: ExperimentConfig,
    sigma_fn: Optional[SigmaFn] = None,
    keep_samples: bool = False,
    use_cache: bool = False,
) -> ExperimentResult:
    """Simulate every statistic of ``cfg`` at every order and compare with the limits.

    ``sigma_fn(p, q, fourth_moment)`` overrides the limiting covariance (test hook).
    ``use_cache`` shares trace batches with other callers in this process.
    """
    cfg.validate()
    law = get_law(cfg.law)
    stats = cfg.statistics()
    rows: list[ResultRow] = []
    normality: dict = {}
    samples: dict = {}
    for n in cfg.n_list:
        if use_cache:
            traces = cached_traces(cfg.law, n, cfg.max_power, cfg.replicates, cfg.seed)
        else:
            traces = simulate_traces(cfg.law, n, cfg.max_power, cfg.replicates, cfg.seed, cfg.parallel_width)
        st = statistic_traces(traces, stats)
        rows += _rows_for_n(n, stats, st, law.fourth_moment, sigma_fn, normality)
        if keep_samples:
            samples[n] = fluctuation_statistic(st, n)
    return ExperimentResult(config=cfg, rows=rows, normality=normality, samples=samples)
