import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circulant_clt.combinatorics import (
    BudgetExceeded,
    ConstraintSetSpec,
    _sigma_extended,
    bilinear_sigma,
    coefficient_a,
    coefficient_b,
    count_distinct_prefix,
    count_exact,
    covariance_model,
    h_closed,
    h_closed_fraction,
    h_empirical,
    sigma_pq,
    sigma_Q,
    tilde_cardinality_order_check,
)
from circulant_clt.oracles import naive_count, naive_distinct_prefix

S = ConstraintSetSpec


# --- counting -------------------------------------------------------------------

def test_count_small_examples():
    assert count_exact(S(7, 2, sign_split=1)) == 3
    assert count_exact(S(7, 2, sign_split=2)) == 0


def test_count_matches_triple_loop():
    n = 101
    brute = sum(
        1 for a, b, c in itertools.product(range(1, 51), repeat=3) if (a + b - c) % n == 0
    )
    assert count_exact(S(n, 3, sign_split=2)) == brute


def test_count_errors():
    with pytest.raises(ValueError):
        S(7, 2, variant="A_tilde")
    with pytest.raises(ValueError):
        S(8, 2, variant="A_tilde", exact_sum=1)
    with pytest.raises(ValueError):
        S(8, 2, sign_split=3)
    with pytest.raises(ValueError):
        S(8, 2, variant="B")
    with pytest.raises(BudgetExceeded):
        count_exact(S(10_001, 30))
    assert count_exact(S(101, 3), budget=10**5) >= 0


@st.composite
def small_specs(draw):
    p = draw(st.integers(0, 4))
    n = draw(st.integers(1, 40))
    k = draw(st.one_of(st.none(), st.integers(0, p)))
    variant = draw(st.sampled_from(["A", "A_tilde"])) if n % 2 == 0 else "A"
    exact = draw(st.one_of(st.none(), st.integers(-2, 2))) if variant == "A" else None
    bound = draw(st.sampled_from(["floor", "trace"]))
    return S(n, p, variant, k, exact, bound)


@settings(max_examples=300)
@given(small_specs())
def test_dp_matches_enumeration(spec):
    assert count_exact(spec) == naive_count(spec)


@settings(max_examples=100)
@given(st.integers(1, 30), st.integers(1, 4))
def test_sign_split_decomposition(n, p):
    total = count_exact(S(n, p))
    by_split = sum(math.comb(p, k) * count_exact(S(n, p, sign_split=k)) for k in range(p + 1))
    assert by_split == total


@settings(max_examples=100)
@given(st.integers(1, 60), st.integers(1, 4), st.data())
def test_exact_sums_partition_residue_class(n, p, data):
    k = data.draw(st.integers(0, p))
    total = count_exact(S(n, p, sign_split=k))
    reach = p * (n // 2) // n + 1
    assert sum(count_exact(S(n, p, sign_split=k, exact_sum=s)) for s in range(-reach, reach + 1)) == total


def test_distinct_prefix_examples():
    assert count_distinct_prefix(S(7, 2, sign_split=1)) == 3
    for n, p, k in [(9, 3, 2), (11, 4, 4), (13, 4, 3), (10, 3, 3), (12, 5, 4)]:
        spec = S(n, p, sign_split=k)
        assert count_distinct_prefix(spec) == naive_distinct_prefix(spec)
    with pytest.raises(ValueError):
        count_distinct_prefix(S(8, 2))
    with pytest.raises(ValueError):
        count_distinct_prefix(S(8, 2, variant="A_tilde", sign_split=1))


@settings(max_examples=60)
@given(st.integers(1, 25), st.integers(1, 4), st.data())
def test_distinct_prefix_matches_enumeration(n, p, data):
    k = data.draw(st.integers(0, p))
    exact = data.draw(st.one_of(st.none(), st.integers(-1, 2)))
    spec = S(n, p, sign_split=k, exact_sum=exact)
    assert count_distinct_prefix(spec) == naive_distinct_prefix(spec)


# --- h_d(s) -----------------------------------------------------------------------

def test_h_values():
    assert h_closed_fraction(2, 1) == Fraction(1, 2)
    assert h_closed(2, 0) == 0.0
    assert h_closed(1, 1) == 0.0 and h_closed(1, 0) == 0.0
    assert [h_closed_fraction(3, s) for s in range(4)] == [Fraction(1, 8)] * 4
    assert [h_closed_fraction(4, s) for s in range(5)] == [
        Fraction(1, 12), Fraction(1, 24), Fraction(1, 12), Fraction(1, 24), Fraction(1, 12)
    ]
    with pytest.raises(ValueError):
        h_closed(0, 0)
    with pytest.raises(ValueError):
        h_closed(2, 3)


def test_h_empirical_examples():
    assert h_empirical(2, 1, 1001) == 500 / 1001
    assert abs(h_empirical(3, 2, 501) - h_closed(3, 2)) <= 0.02
    for n in (5, 50, 501):
        assert h_empirical(1, 1, n) == 0.0


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("n", [101, 202, 333])
def test_h_empirical_converges(d, n):
    for s in range(d + 1):
        assert abs(h_empirical(d, s, n) - h_closed(d, s)) <= 10 / n


def test_h_sums_to_one_over_sign_patterns():
    # all 2^d patterns together hit the zero residue in about (n/2)^d 2^d / n = n^(d-1) ways
    for d in range(2, 7):
        assert sum(math.comb(d, s) * h_closed_fraction(d, s) for s in range(d + 1)) == 1


# --- coefficients and covariances ---------------------------------------------------

def test_coefficients():
    assert coefficient_a(2, 2, 1) == 1
    assert coefficient_b(3, 3, 0) == 36
    assert coefficient_a(4, 4, 2) == 1
    with pytest.raises(ValueError):
        coefficient_a(3, 3, 1)
    with pytest.raises(ValueError):
        coefficient_b(2, 2, 0)


def test_sigma_as_printed():
    assert sigma_pq(2, 3, 3.0) == 0.0
    for m4 in (1.0, 1.8, 3.0, 6.0):
        assert sigma_pq(2, 2, m4) == pytest.approx(m4 - 1)
    assert sigma_pq(3, 3, 1.0) == sigma_pq(3, 3, 3.0) == 15.0
    assert sigma_pq(3, 3, 3.0, boundary_term=False) == 6.0
    assert sigma_pq(4, 4, 3.0) == 96.0
    assert sigma_pq(2, 4, 3.0) == 12.0
    with pytest.raises(ValueError):
        sigma_pq(1, 3, 3.0)
    with pytest.raises(ValueError):
        sigma_pq(2, 2, 0.5)


def test_boundary_term_size():
    # pq C(p-1,(p-1)/2) C(q-1,(q-1)/2) ((p-1)/2)! ((q-1)/2)! / 2^((p+q)/2-1) at p = q = 3
    assert sigma_pq(3, 3, 3.0) - sigma_pq(3, 3, 3.0, boundary_term=False) == 9 * 2 * 2 / 4


def test_covariance_model_structure():
    powers = range(2, 9)
    for m4 in (1.0, 3.0):
        model = covariance_model(powers, m4)
        sig = model.sigma
        assert np.array_equal(sig, sig.T)
        for a, p in enumerate(model.powers):
            for b, q in enumerate(model.powers):
                if (p + q) % 2:
                    assert sig[a, b] == 0.0
            assert sig[a, a] >= 0.0
            if not (p == 2 and m4 == 1.0):
                assert sig[a, a] > 0.0
    # the p = 2 diagonal vanishes exactly when E X^4 = 1
    assert covariance_model([2], 1.0).sigma[0, 0] == 0.0


@pytest.mark.parametrize("p,q", [(2, 2), (2, 4), (4, 6), (3, 3), (3, 5), (2, 3), (6, 6)])
def test_fourth_moment_enters_only_through_first_coefficient(p, q):
    m1, m2 = 5.5, 1.25
    diff = sigma_pq(p, q, m1) - sigma_pq(p, q, m2)
    if p % 2 == 0 and q % 2 == 0:
        assert diff == pytest.approx(coefficient_a(p, q, 1) * (m1 - m2) / 2 ** ((p + q - 4) // 2))
    else:
        assert diff == 0.0


def test_sigma_Q():
    assert sigma_Q([0, 1], 3.0) == 2.0
    assert sigma_Q([0, 1, 1], 3.0) == sigma_pq(2, 2, 3.0) + sigma_pq(3, 3, 3.0)
    assert sigma_Q([0, 2], 3.0) == 4 * 2.0
    with pytest.raises(ValueError):
        sigma_Q([1.0], 3.0)
    with pytest.raises(ValueError):
        sigma_Q([0, 1], 0.9)


def test_index_one_extension():
    assert _sigma_extended(1, 1, 3.0) == 1.0
    assert _sigma_extended(1, 2, 3.0) == 0.0
    assert _sigma_extended(1, 3, 3.0) == 3.0
    # linear term of Q: x + x^3 picks up 2 * sigma_{1,3}
    assert sigma_Q([1, 0, 1], 3.0) == 1.0 + 2 * 3.0 + 15.0


def test_extended_sigma_is_positive_semidefinite():
    for m4 in (1.0, 3.0, 6.0):
        sig = np.array([[_sigma_extended(p, q, m4) for q in range(1, 9)] for p in range(1, 9)])
        assert np.linalg.eigvalsh(sig).min() >= -1e-9 * np.abs(sig).max()


@settings(max_examples=100)
@given(st.lists(st.integers(-3, 3), min_size=2, max_size=6), st.sampled_from([1.0, 1.8, 3.0, 6.0]))
def test_sigma_Q_nonnegative_and_bilinear(coeffs, m4):
    if all(c == 0 for c in coeffs[1:]):
        return
    v = sigma_Q(coeffs, m4)
    assert v >= 0.0
    assert bilinear_sigma([2 * c for c in coeffs], coeffs, m4) == pytest.approx(2 * v)


# --- the second residue class -------------------------------------------------------

def test_tilde_counts():
    rows = tilde_cardinality_order_check(2, [8, 16, 32])
    assert [r[1] for r in rows] == [6, 14, 30]
    assert all(r[4] for r in rows)
    (row,) = tilde_cardinality_order_check(2, [8])
    assert row[1] < row[2]
    # one plus sign: only j = n/2 qualifies
    assert count_exact(S(8, 1, variant="A_tilde", sign_split=1)) == 1
    # over both sign patterns, j = n/2 is counted once per sign
    assert tilde_cardinality_order_check(1, [8])[0][1] == 2
    with pytest.raises(ValueError):
        tilde_cardinality_order_check(2, [8, 9])


def test_tilde_count_grows_like_n_to_the_k_minus_1():
    ratios = [r[1] / r[0] for r in tilde_cardinality_order_check(2, [64, 128, 256])]
    assert max(ratios) - min(ratios) < 0.05
    ratios = [r[1] / r[0] ** 2 for r in tilde_cardinality_order_check(3, [32, 64, 128])]
    assert max(ratios) - min(ratios) < 0.05
