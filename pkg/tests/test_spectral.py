import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from circulant_clt.laws import get_law
from circulant_clt.oracles import dense_eigenvalues, dense_trace_power
from circulant_clt.spectral import (
    SpectralMatrix,
    compensated_sum,
    cosine_table,
    eigenvalues,
    eigenvalues_batch,
    fluctuation_statistic,
    materialize_dense,
    trace_power,
    trace_power_combinatorial,
    trace_powers_batch,
)

entries = st.floats(-2.0, 2.0, allow_nan=False, allow_subnormal=False)


@st.composite
def matrices(draw, max_n):
    n = draw(st.integers(1, max_n))
    x = draw(arrays(np.float64, n // 2 + 1, elements=entries))
    return SpectralMatrix(n, x)


# --- construction -----------------------------------------------------------

def test_rejects_bad_construction():
    with pytest.raises(ValueError):
        SpectralMatrix(0, [1.0])
    with pytest.raises(ValueError):
        SpectralMatrix(5, [1.0, 2.0])
    with pytest.raises(ValueError):
        SpectralMatrix(True, [1.0])


def test_inputs_are_read_only():
    m = SpectralMatrix(4, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        m.x[0] = 5.0
    with pytest.raises(ValueError):
        eigenvalues(m).lam[0] = 5.0


def test_dense_small_orders_unrolled():
    a, b, c = 1.5, -0.25, 4.0
    assert materialize_dense(SpectralMatrix(3, [a, b])).tolist() == [[a, b, b], [b, a, b], [b, b, a]]
    assert materialize_dense(SpectralMatrix(4, [a, b, c])).tolist() == [
        [a, b, c, b], [b, a, b, c], [c, b, a, b], [b, c, b, a]
    ]


def test_dense_matches_folded_index_formula_for_even_order():
    rng = np.random.default_rng(6)
    n, h = 6, 3
    m = SpectralMatrix(n, rng.standard_normal(h + 1))
    d = materialize_dense(m)
    for i in range(n):
        for j in range(n):
            assert d[i, j] == m.x[h - abs(h - abs(i - j))]


@given(matrices(40))
def test_dense_is_symmetric_shifted_circulant(m):
    d = materialize_dense(m)
    assert np.array_equal(d, d.T)
    for i in range(1, m.n):
        assert np.array_equal(d[i], np.roll(d[i - 1], 1))


def test_dense_cap():
    with pytest.raises(ValueError):
        materialize_dense(SpectralMatrix(300, np.zeros(151)))
    assert materialize_dense(SpectralMatrix(300, np.zeros(151)), cap=300).shape == (300, 300)


# --- eigenvalues --------------------------------------------------------------

def test_eigenvalues_identity_like():
    assert np.allclose(eigenvalues(SpectralMatrix(3, [1.0, 0.0])).lam, [1, 1, 1], atol=1e-15)


def test_eigenvalues_even_alternating_term():
    assert eigenvalues(SpectralMatrix(4, [0.0, 0.0, 1.0])).lam.tolist() == [1.0, -1.0, 1.0, -1.0]


def test_eigenvalues_order_five_against_dense_solver():
    m = SpectralMatrix(5, [0.0, 1.0, 0.0])
    lam = eigenvalues(m).lam
    expected = 2 * np.cos(2 * np.pi * np.arange(5) / 5)
    assert np.allclose(lam, expected, atol=1e-14)
    assert np.allclose(np.sort(lam), dense_eigenvalues(m), atol=1e-12)


@given(matrices(64))
def test_eigenvalues_match_dense_solver(m):
    lam = np.sort(eigenvalues(m).lam)
    assert np.allclose(lam, dense_eigenvalues(m), atol=1e-9 * (1 + np.abs(m.x).sum()))


@given(matrices(64))
def test_spectrum_symmetry_and_trace(m):
    lam = eigenvalues(m).lam
    n = m.n
    for ell in range(1, n):
        assert abs(lam[ell] - lam[n - ell]) <= 1e-12
    assert math.isclose(lam.sum(), n * m.x[0], rel_tol=1e-12, abs_tol=1e-11 * n)


def test_cosine_table_accurate_for_large_orders():
    n = 4097
    t = cosine_table(n)
    j, ell = 1500, 1900
    assert abs(t[j - 1, ell] - 2 * math.cos(2 * math.pi * ((j * ell) % n) / n)) < 1e-15
    assert not t.flags.writeable


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((5, 8))
    batch = eigenvalues_batch(x, 14)
    # BLAS may round single rows and batches differently in the last bit
    for row, lam in zip(x, batch):
        assert np.allclose(eigenvalues(SpectralMatrix(14, row)).lam, lam, rtol=1e-14, atol=1e-14)
    with pytest.raises(ValueError):
        eigenvalues_batch(x, 12)


# --- trace powers -------------------------------------------------------------

def test_trace_power_zero_is_order():
    m = SpectralMatrix(7, np.random.default_rng(0).standard_normal(4))
    assert trace_power(eigenvalues(m), 0) == 7.0


def test_trace_power_all_ones():
    assert math.isclose(trace_power(eigenvalues(SpectralMatrix(3, [1.0, 0.0])), 5), 3.0, rel_tol=1e-14)


def test_trace_power_cube_against_dense():
    m = SpectralMatrix(8, np.random.default_rng(8).standard_normal(5))
    a = trace_power(eigenvalues(m), 3)
    b = float(np.trace(np.linalg.matrix_power(materialize_dense(m), 3)))
    assert abs(a - b) <= 1e-10 * abs(b)


def test_trace_power_rejects_negative():
    with pytest.raises(ValueError):
        trace_power(eigenvalues(SpectralMatrix(3, [1.0, 0.0])), -1)


@given(matrices(64), st.integers(0, 6))
def test_trace_power_matches_dense_power(m, p):
    a = trace_power(eigenvalues(m), p)
    b = dense_trace_power(m, p)
    assert abs(a - b) <= 1e-8 * (1 + abs(b))


def test_batch_powers_independent_of_request_order():
    lam = np.random.default_rng(4).standard_normal((3, 50))
    a = trace_powers_batch(lam, [5, 1, 3])
    b = trace_powers_batch(lam, [1, 3, 5])
    assert np.array_equal(a[:, [1, 2, 0]], b)


def test_compensated_sum_beats_naive_on_cancellation():
    a = np.array([1e16, 1.0, -1e16, 1.0, 3.0, -2.0])
    assert compensated_sum(a) == math.fsum(a) == 3.0
    rng = np.random.default_rng(1)
    big = rng.standard_normal(10_001) * 10.0 ** rng.integers(-8, 8, 10_001)
    assert abs(compensated_sum(big) - math.fsum(big)) <= 1e-15 * np.abs(big).sum()
    assert compensated_sum(np.zeros((2, 0))).tolist() == [0.0, 0.0]


# --- combinatorial trace expansion ----------------------------------------------

def test_combinatorial_diagonal_only():
    c = 1.7
    assert math.isclose(trace_power_combinatorial(SpectralMatrix(3, [c, 0.0]), 2), 3 * c * c)


@pytest.mark.parametrize("n,p", [(5, 3), (4, 2)])
def test_combinatorial_matches_spectral_examples(n, p):
    m = SpectralMatrix(n, np.random.default_rng(n).standard_normal(n // 2 + 1))
    a = trace_power(eigenvalues(m), p)
    assert abs(trace_power_combinatorial(m, p) - a) <= 1e-8 * max(1.0, abs(a))


def test_combinatorial_caps():
    with pytest.raises(ValueError):
        trace_power_combinatorial(SpectralMatrix(17, np.zeros(9)), 2)
    with pytest.raises(ValueError):
        trace_power_combinatorial(SpectralMatrix(5, np.zeros(3)), 6)
    with pytest.raises(ValueError):
        trace_power_combinatorial(SpectralMatrix(5, np.zeros(3)), 0)


@settings(max_examples=200)
@given(matrices(15), st.integers(1, 5))
def test_combinatorial_matches_spectral(m, p):
    a = trace_power(eigenvalues(m), p)
    b = trace_power_combinatorial(m, p)
    assert abs(a - b) <= 1e-8 * (1 + abs(a))


# --- fluctuation statistic ------------------------------------------------------

def test_fluctuation_examples():
    assert fluctuation_statistic([4, 4, 4], 4).tolist() == [0, 0, 0]
    assert fluctuation_statistic([0, 2], 1).tolist() == [-1, 1]
    with pytest.raises(ValueError):
        fluctuation_statistic([1.0], 4)


@pytest.mark.parametrize("n", [5, 6])
def test_trivial_powers(n):
    law = get_law("gaussian")
    x = np.stack([law.sample(3, n, r, n // 2 + 1) for r in range(50)]) / math.sqrt(n)
    traces = trace_powers_batch(eigenvalues_batch(x, n), [0, 1])
    assert np.all(fluctuation_statistic(traces[:, :1], n) == 0)
    # centring by the exact mean E X_0 = 0 leaves w_1 = X_0
    assert np.allclose(traces[:, 1] / math.sqrt(n), x[:, 0] * math.sqrt(n), atol=1e-12)
