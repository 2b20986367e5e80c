"""Deliberately naive reference implementations, for cross-checking the fast paths."""

from __future__ import annotations

import itertools

import numpy as np

from .combinatorics import ConstraintSetSpec
from .spectral import SpectralMatrix, materialize_dense

NAIVE_CAP = 3 * 10**7


def dense_trace_power(m: SpectralMatrix, p: int) -> float:
    """``Tr(M^p)`` of the materialized matrix by repeated dense products."""
    d = materialize_dense(m)
    return float(np.trace(np.linalg.matrix_power(d, p)))


def dense_eigenvalues(m: SpectralMatrix) -> np.ndarray:
    return np.linalg.eigvalsh(materialize_dense(m))


def naive_signed_sums(spec: ConstraintSetSpec) -> np.ndarray:
    """Every signed sum ``sum eps_i j_i`` listed once per (tuple, admissible sign pattern)."""
    values = np.arange(1, spec.upper + 1, dtype=np.int64)
    signs = spec.signs()
    per_slot = [values if e > 0 else -values for e in signs] if signs else [np.concatenate([values, -values])] * spec.p
    size = np.prod([len(v) for v in per_slot], dtype=float)
    if size > NAIVE_CAP:
        raise ValueError(f"naive enumeration of {size:.3g} tuples exceeds cap {NAIVE_CAP}")
    sums = np.zeros(1, dtype=np.int64)
    for v in per_slot:
        sums = (sums[:, None] + v[None, :]).reshape(-1)
    return sums


def naive_count(spec: ConstraintSetSpec) -> int:
    sums = naive_signed_sums(spec)
    if spec.exact_sum is not None:
        return int(np.count_nonzero(sums == spec.exact_sum * spec.n))
    target = 0 if spec.variant == "A" else spec.n // 2
    return int(np.count_nonzero(sums % spec.n == target))


def naive_distinct_prefix(spec: ConstraintSetSpec) -> int:
    k = spec.sign_split
    if k is None:
        raise ValueError("needs a sign split")
    count = 0
    for js in itertools.product(range(1, spec.upper + 1), repeat=spec.p):
        if len(set(js[:k])) < k:
            continue
        total = sum(js[:k]) - sum(js[k:])
        if spec.exact_sum is not None:
            count += total == spec.exact_sum * spec.n
        else:
            count += total % spec.n == 0
    return count
