"""The acceptance suite: numbered criteria, each with a tolerance and optional time budget.

Large Monte Carlo batches are shared between criteria through the trace
cache, so the suite simulates each (law, order) pair once.
"""

from __future__ import annotations

import math
import random
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .checks import parity_consistency_check, wick_joint_check
from .combinatorics import (
    ConstraintSetSpec,
    _sigma_extended,
    count_exact,
    h_closed,
    h_closed_fraction,
)
from .experiment import ExperimentConfig, ExperimentResult, run_experiment
from .laws import get_law
from .oracles import dense_trace_power, naive_count
from .spectral import SpectralMatrix, eigenvalues, trace_power, trace_power_combinatorial

DEFAULT_SEED = 20240917
ORDERS = (1023, 1024)
BIG_R = 100_000
NORMALITY_R = 10_000
NORMALITY_SEEDS = 20
NORMALITY_MIN_PASSING = 19
SE_TOL = 3.0
WICK_TOL = 4.0
DISCRIMINATION_SE = 5.0


@dataclass
class Context:
    seed: int = DEFAULT_SEED
    sigma_offset: float = 0.0
    _results: dict = field(default_factory=dict, repr=False)

    @property
    def sigma_fn(self):
        if self.sigma_offset == 0.0:
            return None
        offset = self.sigma_offset
        return lambda p, q, m4: _sigma_extended(p, q, m4) + offset

    def sigma(self, p: int, q: int, m4: float) -> float:
        return (self.sigma_fn or _sigma_extended)(p, q, m4)

    def cfg(self, law: str, n_list=ORDERS, powers=(2, 3, 5), replicates=BIG_R, seed=None, polynomials=()):
        return ExperimentConfig(
            law=law, n_list=tuple(n_list), powers=tuple(powers), polynomials=tuple(polynomials),
            replicates=replicates, seed=self.seed if seed is None else seed, name=f"accept_{law}",
        )

    def big_run(self, law: str) -> ExperimentResult:
        """Shared R = 10^5 run of one law at both orders."""
        if law not in self._results:
            powers = (2, 3, 5) if law == "gaussian" else (2,)
            self._results[law] = run_experiment(self.cfg(law, powers=powers), self.sigma_fn, use_cache=True)
        return self._results[law]


@dataclass
class Outcome:
    passed: bool
    details: list[str]


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    budget_s: Optional[float]
    run: Callable[[Context], Outcome]


def _line(ok: bool, text: str) -> str:
    return f"{'ok  ' if ok else 'FAIL'} {text}"


def _z_line(label: str, est: float, se: float, target: float, tol: float) -> tuple[bool, str]:
    z = (est - target) / se if se > 0 else (0.0 if est == target else math.inf)
    ok = abs(z) <= tol
    return ok, _line(ok, f"{label}: estimate {est:.6g} +/- {se:.3g}, target {target:.6g}, z = {z:+.2f} (tol {tol:g})")


def criterion_1(ctx: Context) -> Outcome:
    rng = np.random.default_rng([ctx.seed, 1])
    worst = 0.0
    failures = 0
    for _ in range(200):
        n = int(rng.integers(1, 65))
        p = int(rng.integers(0, 7))
        m = SpectralMatrix(n, rng.standard_normal(n // 2 + 1))
        a, b = trace_power(eigenvalues(m), p), dense_trace_power(m, p)
        err = abs(a - b) / max(abs(b), 1.0)
        worst = max(worst, err)
        failures += err > 1e-8
    ok = failures == 0
    return Outcome(ok, [_line(ok, f"200 random cases, worst relative error {worst:.3g} (tol 1e-08)")])


def criterion_2(ctx: Context) -> Outcome:
    rng = np.random.default_rng([ctx.seed, 2])
    worst = 0.0
    failures = []
    for n in range(3, 16):
        for p in range(1, 5):
            m = SpectralMatrix(n, rng.standard_normal(n // 2 + 1))
            a, b = trace_power(eigenvalues(m), p), trace_power_combinatorial(m, p)
            err = abs(a - b) / max(abs(a), 1.0)
            worst = max(worst, err)
            if err > 1e-8:
                failures.append((n, p))
    ok = not failures
    return Outcome(ok, [_line(ok, f"n = 3..15 (odd and even forms), p = 1..4: worst relative error {worst:.3g}"
                              + (f"; failing {failures}" if failures else ""))])


def random_count_spec(rng: random.Random) -> ConstraintSetSpec:
    """A random spec small enough for exhaustive enumeration (floor(n/2)^p <= 1e7)."""
    p = rng.randint(1, 5)
    k = rng.choice([None] + list(range(p + 1)))
    # without a sign split the naive loop also walks all 2^p patterns
    cap = 1e7 if k is not None else 2e7 / 2**p
    upper = min(int(cap ** (1.0 / p) + 1e-9), 1000)
    n = rng.randint(1, 2 * upper + 1)
    variant = rng.choice(["A", "A_tilde"]) if n % 2 == 0 else "A"
    exact = rng.randint(-2, 2) if variant == "A" and rng.random() < 0.3 else None
    return ConstraintSetSpec(n=n, p=p, variant=variant, sign_split=k, exact_sum=exact)


def criterion_3(ctx: Context) -> Outcome:
    rng = random.Random(ctx.seed * 31 + 3)
    mismatches = []
    for _ in range(100):
        spec = random_count_spec(rng)
        a, b = count_exact(spec), naive_count(spec)
        if a != b:
            mismatches.append((spec, a, b))
    ok = not mismatches
    return Outcome(ok, [_line(ok, f"100 random specs, {len(mismatches)} mismatches")])


def criterion_4(ctx: Context) -> Outcome:
    details = []
    ok_all = True
    for d in (2, 3, 4):
        for n in (101, 501, 1001):
            worst = 0.0
            for s in range(d + 1):
                count = count_exact(ConstraintSetSpec(n=n, p=d, sign_split=s))
                worst = max(worst, abs(count / n ** (d - 1) - h_closed(d, s)))
            ok = worst <= 10.0 / n
            ok_all &= ok
            details.append(_line(ok, f"d={d} n={n}: max |count/n^(d-1) - h| = {worst:.3g} (tol {10.0 / n:.3g})"))
    exact = h_closed_fraction(2, 1) == Fraction(1, 2)
    ok_all &= exact
    details.append(_line(exact, f"h_2(1) = {h_closed_fraction(2, 1)} exactly"))
    return Outcome(ok_all, details)


def criterion_5(ctx: Context) -> Outcome:
    n = 1024
    details = []
    ok_all = True
    for law in ("gaussian", "uniform", "two_point", "rademacher"):
        row = ctx.big_run(law).row(n, "var(w_2)")
        m4 = get_law(law).fourth_moment
        target = ctx.sigma(2, 2, m4)
        if target < 1e-9:
            # the experiment applies the variance-vanishing rule to degenerate limits
            ok = row.verdict == "pass"
            text = _line(ok, f"{law}: degenerate limit, Var(w_2) = {row.estimate:.3g} vs 3 SE = {3 * row.stderr:.3g}")
        else:
            ok, text = _z_line(f"{law} Var(w_2), E X^4 = {m4:g}", row.estimate, row.stderr, target, SE_TOL)
        ok_all &= ok
        details.append(text)
    return Outcome(ok_all, details)


def criterion_6(ctx: Context) -> Outcome:
    res = ctx.big_run("gaussian")
    details = []
    ok_all = True
    for q in (3, 5):
        row = res.row(1024, f"cov(w_2,w_{q})")
        ok, text = _z_line(f"cov(w_2, w_{q}) at n=1024", row.estimate, row.stderr, ctx.sigma(2, q, 3.0), SE_TOL)
        ok_all &= ok
        details.append(text)
    return Outcome(ok_all, details)


def criterion_7(ctx: Context) -> Outcome:
    res = ctx.big_run("gaussian")
    full = ctx.sigma(3, 3, 3.0)
    partial = _sigma_extended(3, 3, 3.0, boundary_term=False)
    details = []
    ok_all = True
    for n in ORDERS:
        row = res.row(n, "var(w_3)")
        ok, text = _z_line(f"Var(w_3) at n={n} vs full formula", row.estimate, row.stderr, full, SE_TOL)
        ok_all &= ok
        details.append(text)
        z_partial = abs(row.estimate - partial) / row.stderr
        ok = z_partial >= DISCRIMINATION_SE
        ok_all &= ok
        details.append(_line(ok, f"  distance from boundary-term-free value {partial:.6g}: {z_partial:.1f} SE (need >= 5)"))
    return Outcome(ok_all, details)


def criterion_8(ctx: Context) -> Outcome:
    details = []
    ok_all = True
    checks = [(law, 2, 2) for law in ("gaussian", "uniform", "two_point", "rademacher")]
    checks += [("gaussian", 2, 3), ("gaussian", 2, 5), ("gaussian", 3, 3)]
    for law, p, q in checks:
        ctx.big_run(law)
        report = parity_consistency_check(ctx.cfg(law), p, q, SE_TOL, ctx.sigma_fn)
        for a, b, diff, bound in report.comparisons:
            ok = diff <= bound
            ok_all &= ok
            details.append(_line(ok, f"{law} cov(w_{p}, w_{q}): |n={a} - n={b}| = {diff:.3g} (allowed {bound:.3g})"))
    return Outcome(ok_all, details)


def criterion_9(ctx: Context) -> Outcome:
    labels = ("w_2", "w_3", "w_Q(x^2+x^3)")
    passing = 0
    details = []
    for i in range(NORMALITY_SEEDS):
        seed = ctx.seed + 1000 + i
        cfg = ctx.cfg("gaussian", n_list=(1024,), powers=(2, 3), replicates=NORMALITY_R,
                      seed=seed, polynomials=((0.0, 1.0, 1.0),))
        res = run_experiment(cfg, ctx.sigma_fn)
        verdicts = [res.normality[(1024, label)] for label in labels]
        ok = all(v is not None and v.passed for v in verdicts)
        passing += ok
        parts = ", ".join(
            f"{label} JB p={v.jb_pvalue:.2g} KS={v.ks_distance:.3f}/{v.ks_threshold:.3f}"
            for label, v in zip(labels, verdicts) if v is not None
        )
        details.append(_line(ok, f"seed {seed}: {parts}"))
    ok_all = passing >= NORMALITY_MIN_PASSING
    details.append(_line(ok_all, f"{passing}/{NORMALITY_SEEDS} seeds pass (need >= {NORMALITY_MIN_PASSING})"))
    return Outcome(ok_all, details)


def criterion_10(ctx: Context) -> Outcome:
    ctx.big_run("gaussian")
    cfg = ctx.cfg("gaussian", n_list=(1024,))
    details = []
    ok_all = True
    for powers in ((2, 2, 2), (2, 2, 2, 2), (2, 2, 3, 3)):
        (rep,) = wick_joint_check(cfg, powers, WICK_TOL, ctx.sigma_fn)
        label = "E[" + " ".join(f"w_{p}" for p in powers) + "]"
        ok, text = _z_line(label, rep.estimate, rep.stderr, rep.target, WICK_TOL)
        ok_all &= ok
        details.append(text)
    return Outcome(ok_all, details)


def criterion_11(ctx: Context) -> Outcome:
    from .cli import main

    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, threads in enumerate((1, 1, 4)):
            out = Path(tmp) / f"run{i}"
            status = main(["simulate", "quickcheck", "--out", str(out), "--seed", str(ctx.seed),
                           "--threads", str(threads), "--quiet"])
            if status == 2:
                return Outcome(False, [_line(False, "simulate rejected the bundled config")])
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same_runs = outputs[0] == outputs[1]
    same_threads = outputs[0] == outputs[2]
    ok = bool(outputs[0]) and same_runs and same_threads
    return Outcome(ok, [
        _line(same_runs, f"{len(outputs[0])} CSV files byte-identical across two runs"),
        _line(same_threads, "byte-identical between --threads 1 and --threads 4"),
    ])


CRITERIA = (
    Criterion(1, "spectral trace vs dense matrix power", 10.0, criterion_1),
    Criterion(2, "trace expansion over signed index sets vs spectral trace", 60.0, criterion_2),
    Criterion(3, "counting DP vs naive enumeration", 120.0, criterion_3),
    Criterion(4, "h_d(s) convergence of normalized counts", 300.0, criterion_4),
    Criterion(5, "Var(w_2) tracks E X^4 - 1 across laws", 600.0, criterion_5),
    Criterion(6, "mixed-parity covariances vanish", None, criterion_6),
    Criterion(7, "odd-odd covariance including the boundary term", None, criterion_7),
    Criterion(8, "odd and even orders agree", None, criterion_8),
    Criterion(9, "Gaussian limit of w_2, w_3, w_Q", None, criterion_9),
    Criterion(10, "Wick joint moments", None, criterion_10),
    Criterion(11, "simulate output is byte-reproducible", None, criterion_11),
)


@dataclass
class CriterionResult:
    criterion: Criterion
    outcome: Outcome
    elapsed: float

    @property
    def within_budget(self) -> bool:
        b = self.criterion.budget_s
        return b is None or self.elapsed <= b

    @property
    def passed(self) -> bool:
        return self.outcome.passed and self.within_budget

    def summary(self) -> str:
        c = self.criterion
        budget = f" (budget {c.budget_s:g}s)" if c.budget_s is not None else ""
        note = "" if self.within_budget else " OVER TIME BUDGET"
        return f"criterion {c.number:2d} {'PASS' if self.passed else 'FAIL'}  {c.title}  [{self.elapsed:.1f}s{budget}]{note}"


def select(only: Optional[list[int]] = None) -> list[Criterion]:
    if not only:
        return list(CRITERIA)
    known = {c.number: c for c in CRITERIA}
    bad = [k for k in only if k not in known]
    if bad:
        raise ValueError(f"unknown criteria {bad}; valid numbers are 1..{len(CRITERIA)}")
    return [known[k] for k in sorted(set(only))]


def run_criterion(criterion: Criterion, ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    outcome = criterion.run(ctx)
    return CriterionResult(criterion, outcome, time.perf_counter() - t0)


def run_suite(ctx: Context, only: Optional[list[int]] = None, report=print) -> list[CriterionResult]:
    results = []
    for c in select(only):
        res = run_criterion(c, ctx)
        results.append(res)
        if report is not None:
            report(res.summary())
            for line in res.outcome.details:
                report("    " + line)
    return results
