from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DimensionError, DomainError
from numerics_core import to_float
from symfunc import (
    ParamVector,
    SymPolyTable,
    e_eval,
    e_table,
    geometric_tail_bound,
    h_eval,
    h_generating_partial_sum,
    h_table,
    h_to_e,
)

rationals = st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=20)


def test_h_and_e_small_values():
    assert h_eval([1, 2], 2) == 7
    assert e_eval([1, 2, 3], 2) == 11
    assert h_table([1, 1, 1], 3) == [1, 3, 6, 10]
    assert e_table([1, 1, 1], 4) == [1, 3, 3, 1, 0]


def test_h_to_e_on_binomial_table():
    e = h_to_e(SymPolyTable((1, 3, 6, 10)), 3)
    assert e.kind == "e"
    assert e.values == (1, 3, 3, 1)


def test_h_to_e_requires_enough_terms():
    with pytest.raises(DimensionError):
        h_to_e(SymPolyTable((1, 2)), 3)
    with pytest.raises(DomainError):
        h_to_e(SymPolyTable((1, 1), kind="e"), 1)


def test_table_must_start_with_one():
    with pytest.raises(DomainError):
        SymPolyTable((2, 1))


@settings(max_examples=50, deadline=None)
@given(st.lists(rationals, min_size=1, max_size=5), st.integers(min_value=1, max_value=6))
def test_h_and_e_satisfy_the_duality_identity(args, n):
    h = h_table(args, n)
    e = e_table(args, n)
    assert sum((-1) ** k * e[k] * h[n - k] for k in range(n + 1)) == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(rationals, min_size=1, max_size=4), st.randoms(use_true_random=False))
def test_h_is_symmetric(args, rng):
    shuffled = list(args)
    rng.shuffle(shuffled)
    assert h_eval(args, 3) == h_eval(shuffled, 3)
    assert e_eval(args, 2) == e_eval(shuffled, 2)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(rationals, min_size=0, max_size=4),
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=0, max_value=5),
)
def test_zero_arguments_do_not_change_h_or_e(args, zeros, n):
    padded = list(args) + [0] * zeros
    assert h_table(padded, n) == h_table(args, n)
    assert e_table(padded, n) == e_table(args, n)


@settings(max_examples=30, deadline=None)
@given(st.lists(rationals, min_size=1, max_size=4))
def test_jacobi_trudi_recovers_elementary_polynomials(args):
    m = len(args)
    e = h_to_e(SymPolyTable(tuple(h_table(args, m))), m)
    assert list(e.values) == e_table(args, m)


def test_generating_partial_sum_approaches_product():
    args = [1, 2]
    z = Fraction(1, 10)
    total = h_generating_partial_sum(args, z, 40)
    limit = 1 / ((1 - z) * (1 - 2 * z))
    tail = geometric_tail_bound(args, z, 40)
    assert abs(to_float(total) - to_float(limit)) <= tail


def test_generating_partial_sum_outside_the_disc():
    with pytest.raises(DomainError):
        h_generating_partial_sum([1, 2], "0.5", 10)
    assert geometric_tail_bound([1, 2], "0.5", 10) == mpmath.inf


def test_param_vector_validation():
    with pytest.raises(DimensionError):
        ParamVector(())
    with pytest.raises(DomainError):
        ParamVector.of(1, 0)


def test_param_vector_helpers():
    p = ParamVector.from_reciprocals([1, 2])
    assert p.alpha == (1, Fraction(1, 2))
    assert p.a == (1, 2)
    assert p.is_exact
    assert p.distinct
    assert not ParamVector.of(1, 1).distinct
    assert ParamVector.of(3, 1, 2).ascending().alpha == (1, 2, 3)


def test_param_vector_with_floats_becomes_mpf():
    p = ParamVector.of(mpmath.mpf(1), 2)
    assert not p.is_exact
    assert all(isinstance(v, mpmath.mpf) for v in p.alpha)
