"""Symmetric circulant matrices and their spectra.

A symmetric circulant matrix of order ``n`` is determined by its first
``n // 2 + 1`` entries ``x_0 .. x_{n//2}``; entry ``(i, j)`` equals
``x_{min(|i-j|, n-|i-j|)}``.  Its eigenvalues are explicit cosine sums::

    odd n:   lam_l = x_0 + 2 * sum_{j=1}^{(n-1)/2} x_j cos(2 pi l j / n)
    even n:  lam_l = x_0 + (-1)^l x_{n/2} + 2 * sum_{j=1}^{n/2-1} x_j cos(2 pi l j / n)

Everything here uses 0-based indices.  Kernels are direct cosine sums (a
matrix product against a cached table), not FFTs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DENSE_CAP = 256
COMBINATORIAL_N_CAP = 15
COMBINATORIAL_P_CAP = 5


def half_order(n: int) -> int:
    """Number of free off-diagonal inputs, ``n // 2``."""
    return n // 2


def inner_bound(n: int) -> int:
    """Largest index j whose entry appears twice in every row.

    This is ``(n - 1) // 2`` for odd ``n`` and ``n // 2 - 1`` for even ``n``;
    for even ``n`` the entry ``x_{n/2}`` appears once and is handled apart.
    """
    return (n - 1) // 2


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralMatrix:
    """Implicit symmetric circulant matrix ``SC_n`` given by ``x_0..x_{n//2}``."""

    n: int
    x: np.ndarray

    def __post_init__(self):
        n = self.n
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"matrix order must be a positive integer, got {n!r}")
        x = np.array(self.x, dtype=np.float64).reshape(-1)
        if x.shape[0] != n // 2 + 1:
            raise ValueError(
                f"order {n} needs {n // 2 + 1} inputs x_0..x_{n // 2}, got {x.shape[0]}"
            )
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "x", _readonly(x))


@dataclass(frozen=True)
class EigenSpectrum:
    n: int
    lam: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=np.float64).reshape(-1)
        if lam.shape[0] != self.n:
            raise ValueError(f"spectrum of order {self.n} has {lam.shape[0]} values")
        object.__setattr__(self, "lam", _readonly(lam))


@lru_cache(maxsize=16)
def cosine_table(n: int) -> np.ndarray:
    """Rows ``j = 1..n//2`` of the map from inputs to the half spectrum.

    Column ``l`` (``0 <= l <= n//2``) holds the coefficient of ``x_j`` in
    ``lam_l``: ``2 cos(2 pi l j / n)``, or ``(-1)^l`` for ``j = n/2`` when ``n``
    is even.  The angle is reduced as ``(l*j) mod n`` before scaling so the
    table is accurate for large ``n``.
    """
    h = n // 2
    ell = np.arange(h + 1)
    j = np.arange(1, h + 1)
    phase = np.outer(j, ell) % n
    table = 2.0 * np.cos((2.0 * np.pi / n) * phase)
    if n % 2 == 0 and h >= 1:
        table[h - 1] = np.where(ell % 2 == 0, 1.0, -1.0)
    return _readonly(table)


def half_spectrum_batch(x: np.ndarray, n: int) -> np.ndarray:
    """``lam_0 .. lam_{n//2}`` for every row of ``x`` (shape ``(R, n//2 + 1)``)."""
    x = np.asarray(x, dtype=np.float64)
    lam = np.repeat(x[:, :1], n // 2 + 1, axis=1)
    if n // 2 >= 1:
        lam += x[:, 1:] @ cosine_table(n)
    return lam


def mirror_half_spectrum(half: np.ndarray, n: int) -> np.ndarray:
    """Expand ``lam_0..lam_{n//2}`` to the full spectrum using ``lam_l = lam_{n-l}``."""
    tail = half[..., 1 : (n - 1) // 2 + 1][..., ::-1]
    return np.concatenate([half, tail], axis=-1)


def eigenvalues_batch(x: np.ndarray, n: int) -> np.ndarray:
    """Full spectra, shape ``(R, n)``, for a batch of input rows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if n < 1 or x.shape[1] != n // 2 + 1:
        raise ValueError(f"order {n} needs rows of length {n // 2 + 1}, got {x.shape[1]}")
    return mirror_half_spectrum(half_spectrum_batch(x, n), n)


def eigenvalues(m: SpectralMatrix) -> EigenSpectrum:
    """Eigenvalues ``lam_0..lam_{n-1}`` of ``m`` via the cosine formula."""
    lam = eigenvalues_batch(m.x[None, :], m.n)[0]
    return EigenSpectrum(n=m.n, lam=lam)


def materialize_dense(m: SpectralMatrix, cap: int = DENSE_CAP) -> np.ndarray:
    """Explicit ``n x n`` matrix.  For oracle use on small ``n`` only."""
    n = m.n
    if n > cap:
        raise ValueError(f"refusing to materialize order {n} > cap {cap}")
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    return m.x[np.minimum(d, n - d)]


def _two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def compensated_sum(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum along ``axis`` with error-free transformations.

    Pairwise cascade of TwoSum steps; the rounding errors of every step are
    collected and added back at the end.  Accurate to a few ulps of the
    result unless the data has a condition number near ``1/eps``.
    """
    a = np.moveaxis(np.asarray(a, dtype=np.float64), axis, -1)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    errors = []
    while a.shape[-1] > 1:
        if a.shape[-1] % 2:
            a = np.concatenate([a, np.zeros(a.shape[:-1] + (1,))], axis=-1)
        s, e = _two_sum(a[..., 0::2], a[..., 1::2])
        errors.append(e.sum(axis=-1))
        a = s
    return a[..., 0] + np.sum(errors, axis=0) if errors else a[..., 0]


def trace_powers_batch(lam: np.ndarray, powers) -> np.ndarray:
    """``sum_l lam_l^p`` for each row of ``lam`` and each ``p``; shape ``(R, len(powers))``."""
    lam = np.atleast_2d(np.asarray(lam, dtype=np.float64))
    powers = list(powers)
    if any(p < 0 for p in powers):
        raise ValueError(f"powers must be nonnegative, got {powers}")
    out = np.empty((lam.shape[0], len(powers)))
    # repeated multiplication is exact-per-step and much cheaper than pow()
    cur, cur_p = np.ones_like(lam), 0
    for col, p in sorted(enumerate(powers), key=lambda t: t[1]):
        while cur_p < p:
            cur = cur * lam
            cur_p += 1
        if p == 0:
            out[:, col] = lam.shape[1]
        elif p >= 4:
            out[:, col] = compensated_sum(cur)
        else:
            out[:, col] = np.sum(cur, axis=1)
    return out


def trace_power(s: EigenSpectrum, p: int) -> float:
    """``Tr(SC_n^p) = sum_l lam_l^p``; ``p = 0`` gives ``n`` exactly."""
    if p < 0:
        raise ValueError(f"power must be nonnegative, got {p}")
    if p == 0:
        return float(s.n)
    return float(trace_powers_batch(s.lam[None, :], [p])[0, 0])


def _signed_tuple_sums(x_inner: np.ndarray, k: int, n: int):
    """Yield ``(residue mod n, product)`` over all index tuples and sign patterns.

    Indices run over ``1..len(x_inner)``; each tuple is counted once per sign
    pattern, i.e. with multiplicity.
    """
    if k == 0:
        yield 0, 1.0
        return
    m = len(x_inner)
    values = range(1, m + 1)
    for js in itertools.product(values, repeat=k):
        prod = 1.0
        for j in js:
            prod *= x_inner[j - 1]
        for eps in itertools.product((1, -1), repeat=k):
            yield sum(e * j for e, j in zip(eps, js)) % n, prod


def trace_power_combinatorial(
    m: SpectralMatrix,
    p: int,
    n_cap: int = COMBINATORIAL_N_CAP,
    p_cap: int = COMBINATORIAL_P_CAP,
) -> float:
    """``Tr(SC_n^p)`` by enumerating the signed index tuples of the trace expansion.

    Exponential cost; an oracle for the spectral path.  Odd ``n`` uses
    ``n * sum_k C(p,k) x_0^{p-k} sum_{A_k} x_J``.  Even ``n`` uses
    ``n/2 * sum_k C(p,k) [Y_k sum_{A_k} x_J + Y~_k sum_{A~_k} x_J]`` with
    ``Y_k, Y~_k = (x_0 + x_{n/2})^{p-k} +/- (x_0 - x_{n/2})^{p-k}``.  Indices in
    both sets run over ``1..inner_bound(n)``.
    """
    n = m.n
    if p < 1 or p > p_cap:
        raise ValueError(f"power {p} outside 1..{p_cap}")
    if n > n_cap:
        raise ValueError(f"order {n} above oracle cap {n_cap}")
    x = m.x
    inner = x[1 : inner_bound(n) + 1]
    x0 = x[0]
    if n % 2:
        total = 0.0
        for k in range(p + 1):
            s_a = math.fsum(prod for res, prod in _signed_tuple_sums(inner, k, n) if res == 0)
            total += math.comb(p, k) * x0 ** (p - k) * s_a
        return n * total
    half = n // 2
    xh = x[half]
    total = 0.0
    for k in range(p + 1):
        plus, minus = (x0 + xh) ** (p - k), (x0 - xh) ** (p - k)
        on_a, on_tilde = [], []
        for res, prod in _signed_tuple_sums(inner, k, n):
            if res == 0:
                on_a.append(prod)
            elif res == half:
                on_tilde.append(prod)
        total += math.comb(p, k) * (
            (plus + minus) * math.fsum(on_a) + (plus - minus) * math.fsum(on_tilde)
        )
    return half * total


def fluctuation_statistic(traces, n: int) -> np.ndarray:
    """Center replicate traces by their batch mean and scale by ``1/sqrt(n)``."""
    t = np.asarray(traces, dtype=np.float64)
    if t.shape[0] < 2:
        raise ValueError("centering needs at least 2 replicates")
    return (t - t.mean(axis=0)) / math.sqrt(n)
