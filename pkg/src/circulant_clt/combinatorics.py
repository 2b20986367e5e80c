"""Counting the signed index sets and the limiting covariances built on them.

The sets are tuples ``(j_1..j_p)`` with ``1 <= j_i <= U`` and signs ``eps_i``
such that ``sum eps_i j_i`` lies in a residue class.  A tuple is counted once
per admissible sign pattern.  With a sign split ``k`` the pattern is fixed to
``k`` plus signs followed by ``p - k`` minus signs.

``U`` is ``n // 2`` by default (``index_bound="floor"``).  The trace expansion
of an even-order matrix keeps ``x_{n/2}`` apart and needs ``U = n/2 - 1``
instead (``index_bound="trace"``); for odd ``n`` both agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import accumulate
from typing import Optional, Sequence

import numpy as np

from .spectral import inner_bound

DEFAULT_BUDGET = 10**9
DEGENERATE_SIGMA = 1e-9

VARIANTS = ("A", "A_tilde")
INDEX_BOUNDS = ("floor", "trace")


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintSetSpec:
    n: int
    p: int
    variant: str = "A"
    sign_split: Optional[int] = None
    exact_sum: Optional[int] = None
    index_bound: str = "floor"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"modulus must be positive, got {self.n}")
        if self.p < 0:
            raise ValueError(f"tuple length must be nonnegative, got {self.p}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.index_bound not in INDEX_BOUNDS:
            raise ValueError(f"unknown index bound {self.index_bound!r}")
        if self.variant == "A_tilde":
            if self.n % 2:
                raise ValueError(f"A_tilde needs an even modulus, got n={self.n}")
            if self.exact_sum is not None:
                raise ValueError("exact sums are only defined for variant A")
        if self.sign_split is not None and not 0 <= self.sign_split <= self.p:
            raise ValueError(f"sign split {self.sign_split} outside 0..{self.p}")

    @property
    def upper(self) -> int:
        return self.n // 2 if self.index_bound == "floor" else inner_bound(self.n)

    def signs(self) -> Optional[list[int]]:
        if self.sign_split is None:
            return None
        return [1] * self.sign_split + [-1] * (self.p - self.sign_split)


def _check_budget(spec: ConstraintSetSpec, budget: int) -> None:
    cost = spec.p * spec.n * (spec.n // 2)
    if cost > budget:
        raise BudgetExceeded(
            f"counting cost p*n*floor(n/2) = {cost} exceeds budget {budget}"
        )


def _cyclic_interval_step(state: list[int], sign: int, upper: int, n: int) -> list[int]:
    # new[r] = sum_{j=1..upper} state[(r - sign*j) mod n], via prefix sums on a doubled copy
    if upper == 0:
        return [0] * n
    prefix = [0] + list(accumulate(state + state))
    if sign > 0:
        return [prefix[r + n] - prefix[r + n - upper] for r in range(n)]
    return [prefix[r + upper + 1] - prefix[r + 1] for r in range(n)]


def _cyclic_scaled_step(state: list[int], coeff: int, upper: int, n: int) -> list[int]:
    shifts = [0] * n
    for j in range(1, upper + 1):
        shifts[(coeff * j) % n] += 1
    new = [0] * n
    for shift, mult in enumerate(shifts):
        if mult:
            for r in range(n):
                new[r] += mult * state[(r - shift) % n]
    return new


def _line_interval_step(state: list[int], lo: int, sign: int, upper: int):
    """Convolve a histogram over integers ``lo..lo+len-1`` with ``{sign*j : j=1..upper}``."""
    size = len(state)
    if sign > 0:
        new_lo = lo + 1
    else:
        new_lo = lo - upper
    new_size = size + upper - 1 if upper else 0
    prefix = [0] + list(accumulate(state))

    def window(a: int, b: int) -> int:
        a, b = max(a, 0), min(b, size - 1)
        return prefix[b + 1] - prefix[a] if a <= b else 0

    new = []
    for t in range(new_size):
        total = new_lo + t
        if sign > 0:
            # total = old + j  ->  old in total-upper .. total-1
            new.append(window(total - upper - lo, total - 1 - lo))
        else:
            new.append(window(total + 1 - lo, total + upper - lo))
    return new, new_lo


def _line_scaled_step(state: list[int], lo: int, coeff: int, upper: int):
    """Convolve with ``{coeff * j : j = 1..upper}`` on the integer line."""
    if upper == 0:
        return [], lo
    shifts = [coeff * j for j in range(1, upper + 1)]
    new_lo = lo + min(shifts)
    new = [0] * (len(state) + max(shifts) - min(shifts))
    for shift in shifts:
        base = lo + shift - new_lo
        for i, v in enumerate(state):
            if v:
                new[base + i] += v
    return new, new_lo


def _residue_histogram(spec: ConstraintSetSpec, coeffs: Sequence[int]) -> list[int]:
    n, upper = spec.n, spec.upper
    state = [0] * n
    state[0] = 1
    for c in coeffs:
        if c == 0:
            plus = _cyclic_interval_step(state, 1, upper, n)
            minus = _cyclic_interval_step(state, -1, upper, n)
            state = [a + b for a, b in zip(plus, minus)]
        elif abs(c) == 1:
            state = _cyclic_interval_step(state, c, upper, n)
        else:
            state = _cyclic_scaled_step(state, c, upper, n)
    return state


def _sum_histogram(spec: ConstraintSetSpec, coeffs: Sequence[int]) -> tuple[list[int], int]:
    upper = spec.upper
    state, lo = [1], 0
    for c in coeffs:
        if c == 0:
            plus, plus_lo = _line_interval_step(state, lo, 1, upper)
            minus, minus_lo = _line_interval_step(state, lo, -1, upper)
            new_lo = min(plus_lo, minus_lo)
            new = [0] * (max(plus_lo + len(plus), minus_lo + len(minus)) - new_lo)
            for part, part_lo in ((plus, plus_lo), (minus, minus_lo)):
                for i, v in enumerate(part):
                    new[part_lo - new_lo + i] += v
            state, lo = new, new_lo
        elif abs(c) == 1:
            state, lo = _line_interval_step(state, lo, c, upper)
        else:
            state, lo = _line_scaled_step(state, lo, c, upper)
        if not state:
            return [], 0
    return state, lo


def _count_with_coeffs(spec: ConstraintSetSpec, coeffs: Sequence[int]) -> int:
    """Count value assignments; coefficient 0 means "either sign", else ``coeff * j``."""
    if spec.exact_sum is not None:
        state, lo = _sum_histogram(spec, coeffs)
        idx = spec.exact_sum * spec.n - lo
        return state[idx] if 0 <= idx < len(state) else 0
    state = _residue_histogram(spec, coeffs)
    if spec.variant == "A":
        return state[0]
    return state[spec.n // 2]


def count_exact(spec: ConstraintSetSpec, budget: int = DEFAULT_BUDGET) -> int:
    """Exact cardinality of the set described by ``spec``.

    Dynamic programming over residues mod ``n`` (over true integer sums when
    ``exact_sum`` is set).  Without a sign split every position may take
    either sign, which sums over all ``2^p`` patterns.
    """
    _check_budget(spec, budget)
    signs = spec.signs()
    coeffs = [0] * spec.p if signs is None else signs
    return _count_with_coeffs(spec, coeffs)


def _set_partitions(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]


def count_distinct_prefix(spec: ConstraintSetSpec, budget: int = DEFAULT_BUDGET) -> int:
    """Count tuples of ``spec`` whose first ``k`` (plus-signed) entries are pairwise distinct.

    Inclusion-exclusion over set partitions of the first ``k`` positions: a
    block of size ``b`` forced equal contributes ``b * j`` and weight
    ``(-1)^(b-1) (b-1)!``.
    """
    if spec.variant != "A":
        raise ValueError("distinct-prefix counts are defined for variant A only")
    if spec.sign_split is None:
        raise ValueError("distinct-prefix counts need a sign split k")
    _check_budget(spec, budget)
    k = spec.sign_split
    tail = [-1] * (spec.p - k)
    total = 0
    for partition in _set_partitions(list(range(k))):
        weight = 1
        for block in partition:
            weight *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
        coeffs = [len(block) for block in partition] + tail
        total += weight * _count_with_coeffs(spec, coeffs)
    return total


@lru_cache(maxsize=None)
def h_closed_fraction(d: int, s: int) -> Fraction:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0 <= s <= d:
        raise ValueError(f"sign split {s} outside 0..{d}")
    if d == 1:
        # the one-dimensional sets are empty for every n; the closed form is
        # a step function evaluated at its jumps and does not give 0 here
        return Fraction(0)
    total = Fraction(0)
    for i in range(-math.ceil(Fraction(d - s, 2)), s // 2 + 1):
        top = 2 * i + d - s
        for j in range(0, top + 1):
            total += (-1) ** j * math.comb(d, j) * Fraction(top - j, 2) ** (d - 1)
    value = total / math.factorial(d - 1)
    assert value >= 0, (d, s, value)
    return value


def h_closed(d: int, s: int) -> float:
    """Limit of ``|A_d^{(s)}| / n^{d-1}``.

    Equals ``2^{1-d}`` times the sum of the Irwin-Hall(d) density over the
    points ``2m + d - s``, written out as a finite alternating sum.
    """
    return float(h_closed_fraction(d, s))


def h_empirical(d: int, s: int, n: int, budget: int = DEFAULT_BUDGET) -> float:
    count = count_exact(ConstraintSetSpec(n=n, p=d, sign_split=s), budget=budget)
    return count / n ** (d - 1)


def _pair_factor(p: int, shared: int) -> int:
    # place the p - shared opposite-sign pair-matched entries among p slots
    free = p - shared
    if shared < 0 or free < 0 or free % 2:
        raise ValueError(f"cannot pair-match {free} of {p} entries")
    return math.comb(p, free) * math.comb(free, free // 2) * math.factorial(free // 2)


def coefficient_a(p: int, q: int, r: int) -> int:
    return _pair_factor(p, 2 * r) * _pair_factor(q, 2 * r)


def coefficient_b(p: int, q: int, r: int) -> int:
    return _pair_factor(p, 2 * r + 1) * _pair_factor(q, 2 * r + 1)


@lru_cache(maxsize=None)
def _matched_volume(d: int) -> Fraction:
    return sum(
        (math.comb(d, s) ** 2 * math.factorial(s) * math.factorial(d - s) * h_closed_fraction(d, s)
         for s in range(d + 1)),
        Fraction(0),
    )


@lru_cache(maxsize=None)
def _sigma_parts(p: int, q: int, boundary_term: bool) -> tuple[Fraction, Fraction]:
    """``(constant, slope)`` with ``sigma_{p,q} = constant + slope * (E X^4 - 1)``."""
    if (p + q) % 2:
        return Fraction(0), Fraction(0)
    if p % 2 == 0:
        slope = Fraction(coefficient_a(p, q, 1), 2 ** ((p + q - 4) // 2))
        const = Fraction(0)
        for r in range(2, min(p, q) // 2 + 1):
            const += Fraction(coefficient_a(p, q, r), 2 ** ((p + q - 4 * r) // 2)) * _matched_volume(2 * r)
        return const, slope
    const = Fraction(0)
    for r in range(0, min(p - 1, q - 1) // 2 + 1):
        const += Fraction(coefficient_b(p, q, r), 2 ** ((p + q - 4 * r - 2) // 2)) * _matched_volume(2 * r + 1)
    if boundary_term:
        hp, hq = (p - 1) // 2, (q - 1) // 2
        const += Fraction(
            p * q * math.comb(p - 1, hp) * math.comb(q - 1, hq) * math.factorial(hp) * math.factorial(hq),
            2 ** ((p + q) // 2 - 1),
        )
    return const, Fraction(0)


def _sigma_extended(p: int, q: int, fourth_moment: float, boundary_term: bool = True) -> float:
    const, slope = _sigma_parts(min(p, q), max(p, q), boundary_term)
    return float(const + slope * (Fraction(fourth_moment) - 1))


def sigma_pq(p: int, q: int, fourth_moment: float, boundary_term: bool = True) -> float:
    """Limiting covariance of ``(w_p, w_q)``, evaluated as the closed form is printed.

    ``boundary_term=False`` drops the odd-odd ``p q C(p-1,(p-1)/2) ...`` term;
    it exists only so tests can tell the two variants apart.
    """
    if p < 2 or q < 2:
        raise ValueError(f"covariance is defined for powers >= 2, got ({p}, {q})")
    if fourth_moment < 1:
        raise ValueError(f"E X^4 must be >= 1, got {fourth_moment}")
    return _sigma_extended(p, q, fourth_moment, boundary_term)


@dataclass(frozen=True)
class CovarianceModel:
    powers: tuple[int, ...]
    fourth_moment: float
    sigma: np.ndarray


def covariance_model(powers: Sequence[int], fourth_moment: float) -> CovarianceModel:
    powers = tuple(sorted(set(int(p) for p in powers)))
    k = len(powers)
    sigma = np.zeros((k, k))
    for a in range(k):
        for b in range(a, k):
            sigma[a, b] = sigma[b, a] = sigma_pq(powers[a], powers[b], fourth_moment)
    sigma.setflags(write=False)
    return CovarianceModel(powers=powers, fourth_moment=float(fourth_moment), sigma=sigma)


def polynomial_degree(coeffs: Sequence[float]) -> int:
    nonzero = [k for k, a in enumerate(coeffs, start=1) if a != 0]
    return nonzero[-1] if nonzero else 0


def bilinear_sigma(
    left: Sequence[float], right: Sequence[float], fourth_moment: float, sigma_fn=None
) -> float:
    """``sum_{l,k} left_l right_k sigma_{l,k}`` over coefficient lists indexed from power 1.

    Index 1 is covered by evaluating the odd-odd closed form at ``p = 1``,
    which gives ``sigma_{1,1} = 1`` (``w_1 = X_0``) and, for odd ``q``, the
    covariance carried by the ``X_0`` term of ``w_q``.
    """
    sigma_fn = sigma_fn or _sigma_extended
    total = 0.0
    for l, a in enumerate(left, start=1):
        if a == 0:
            continue
        for k, b in enumerate(right, start=1):
            if b != 0:
                total += a * b * sigma_fn(l, k, fourth_moment)
    return total


def sigma_Q(coeffs: Sequence[float], fourth_moment: float) -> float:
    """Limiting variance of ``w_Q`` for ``Q(x) = sum_k coeffs[k-1] x^k``."""
    if polynomial_degree(coeffs) < 2:
        raise ValueError("test polynomial must have degree >= 2")
    if fourth_moment < 1:
        raise ValueError(f"E X^4 must be >= 1, got {fourth_moment}")
    value = bilinear_sigma(coeffs, coeffs, fourth_moment)
    if value < -1e-12:
        raise ArithmeticError(f"negative limiting variance {value} for {list(coeffs)}")
    return max(value, 0.0)


def tilde_cardinality_order_check(k: int, n_list: Sequence[int], budget: int = DEFAULT_BUDGET):
    """Rows ``(n, |A~_k|, |A_k|, |A~_k| / n^(k-2), |A~_k| < |A_k|)`` over all sign patterns."""
    odd = [n for n in n_list if n % 2]
    if odd:
        raise ValueError(f"A_tilde needs even orders, got {odd}")
    rows = []
    for n in n_list:
        tilde = count_exact(ConstraintSetSpec(n=n, p=k, variant="A_tilde"), budget)
        plain = count_exact(ConstraintSetSpec(n=n, p=k, variant="A"), budget)
        rows.append((n, tilde, plain, tilde / float(n) ** (k - 2), tilde < plain))
    return rows
