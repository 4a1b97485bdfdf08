
import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import BudgetExceededError, DomainError, GridError, ModeError, SamplingError
from numerics_core import DenseMatrix, SignClass
from pf_densities import HW, Gamma, Heaviside, LambdaD
from symfunc import ParamVector
from tp_check import (
    GridSample,
    MinorBudget,
    Verdict,
    check_tn,
    check_tp,
    count_minors,
    evaluate_minor,
    minimum_minor,
    principal_minor_scan,
    sample,
    scaled_value,
)

PASCAL = [[1, 1, 1], [1, 2, 3], [1, 3, 6]]


def test_sample_builds_toeplitz_matrix():
    g = sample(Heaviside(), [0, 1], [0, 1])
    assert g.matrix.to_rows() == [[1, 0], [1, 1]]
    assert g.matrix.is_exact
    assert g.entry_errors == (0, 0, 0, 0)


def test_sample_requires_increasing_grids():
    with pytest.raises(GridError):
        sample(Heaviside(), [1, 0], [0, 1])
    with pytest.raises(GridError):
        sample(Heaviside(), [], [0])


def test_sample_refuses_unbounded_entries():
    with pytest.raises(SamplingError):
        sample(Gamma("0.5"), [0, 1], [0, 1])


def test_hw_kernel_is_tn_on_a_four_point_grid():
    g = sample(HW(ParamVector.of(1, 1)), [0, 1, 2, 3], [0, 1, 2, 3])
    report = check_tn(g, 4)
    assert report.verdict is Verdict.TN
    assert report.holds
    assert report.minors_evaluated == count_minors(4, 4, 4) == 69


def test_lambda_two_has_the_analytic_negative_minor():
    g = sample(LambdaD(2), [1, 2], [0, 1])
    report = check_tn(g, 2)
    assert report.verdict is Verdict.NOT_TN
    assert report.failure == "negative"
    witness = report.witness
    assert witness.row_indices == (0, 1) and witness.col_indices == (0, 1)
    assert witness.principal
    assert abs(witness.det_value + mpmath.exp(-2)) < mpmath.mpf("1e-30")
    assert principal_minor_scan(g).det_value == witness.det_value


def test_heaviside_fails_tp_by_a_zero_minor():
    report = check_tp(sample(Heaviside(), [0, 1], [0, 1]))
    assert report.verdict is Verdict.NOT_TP
    assert report.failure == "zero"
    assert report.witness.sign is SignClass.ZERO


def test_check_tn_short_circuits_in_enumeration_order():
    report = check_tn(DenseMatrix.from_rows([[1, 2], [-1, 1]]))
    assert report.witness.row_indices == (1,)
    assert report.witness.col_indices == (0,)
    assert report.minors_evaluated == 3


def test_tn_report_keeps_smallest_minor_when_passing():
    report = check_tn(DenseMatrix.from_rows(PASCAL))
    assert report.holds
    assert report.witness.det_value == 1


def test_pascal_matrix_is_tp_in_both_modes():
    assert check_tp(DenseMatrix.from_rows(PASCAL)).verdict is Verdict.TP
    assert check_tp(DenseMatrix.from_rows(PASCAL), use_fekete=True).verdict is Verdict.TP


def test_fekete_mode_needs_full_order():
    with pytest.raises(ModeError):
        check_tp(DenseMatrix.from_rows(PASCAL), 2, use_fekete=True)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(min_value=1, max_value=4).flatmap(
        lambda n: st.lists(
            st.lists(st.integers(0, 6), min_size=n, max_size=n), min_size=n, max_size=n
        )
    )
)
def test_fekete_mode_agrees_with_full_enumeration(rows):
    matrix = DenseMatrix.from_rows(rows)
    assert check_tp(matrix).holds == check_tp(matrix, use_fekete=True).holds


@settings(max_examples=80, deadline=None)
@given(
    st.integers(min_value=1, max_value=4).flatmap(
        lambda n: st.tuples(
            st.lists(
                st.lists(st.integers(1, 9), min_size=n, max_size=n), min_size=n, max_size=n
            ),
            st.integers(min_value=1, max_value=n),
        )
    )
)
def test_tp_implies_tn(case):
    rows, p = case
    matrix = DenseMatrix.from_rows(rows)
    if check_tp(matrix, p).holds:
        assert check_tn(matrix, p).holds
    if not check_tn(matrix, p).holds:
        assert not check_tp(matrix, p).holds


def test_sample_promotes_mixed_grids():
    g = sample(Gamma(1), [0, 1], [mpmath.mpf(-3), mpmath.mpf(-2)])
    assert not g.matrix.is_exact
    rows = g.matrix.to_rows()
    assert abs(rows[0][0] - mpmath.exp(-3)) < mpmath.mpf("1e-30")
    assert abs(rows[1][1] - mpmath.exp(-3)) < mpmath.mpf("1e-30")
    assert abs(rows[0][1] - mpmath.exp(-2)) < mpmath.mpf("1e-30")


def test_budget_is_enforced_before_enumeration():
    with pytest.raises(BudgetExceededError) as excinfo:
        check_tn(DenseMatrix.from_rows(PASCAL), budget=5)
    assert excinfo.value.limit == 5
    assert excinfo.value.requested == count_minors(3, 3, 3)


def test_shared_budget_accumulates():
    budget = MinorBudget(8)
    check_tn(DenseMatrix.from_rows([[1, 0], [0, 1]]), budget=budget)
    assert budget.spent == 5
    assert budget.remaining == 3
    with pytest.raises(BudgetExceededError):
        check_tn(DenseMatrix.from_rows([[1, 0], [0, 1]]), budget=budget)
    with pytest.raises(DomainError):
        MinorBudget(0)


def test_order_must_be_positive():
    with pytest.raises(DomainError):
        check_tn(DenseMatrix.from_rows([[1]]), 0)


def test_principal_minor_scan():
    assert principal_minor_scan(DenseMatrix.from_rows(PASCAL)) is None
    worst = principal_minor_scan(DenseMatrix.from_rows([[1, 2], [3, 1]]))
    assert worst.row_indices == (0, 1)
    assert worst.det_value == -5
    with pytest.raises(GridError):
        principal_minor_scan(DenseMatrix(1, 2, (1, 1)))


def test_count_minors():
    assert count_minors(3, 3, 2) == 9 + 9
    assert count_minors(3, 3, 3, principal_only=True) == 7
    assert count_minors(2, 5, 4) == 10 + 10


def test_evaluate_minor_exact_and_scaled():
    g = GridSample.from_matrix([[2, 1], [1, 2]])
    certificate = evaluate_minor(g, (0, 1), (0, 1))
    assert certificate.det_value == 3
    assert certificate.error_bound == 0
    assert certificate.order == 2
    assert scaled_value(g, certificate) == mpmath.mpf("0.75")


def test_minimum_minor_prefers_negative_minors():
    g = GridSample.from_matrix([[1, 2], [3, 1]])
    certificate, score = minimum_minor(g)
    assert certificate.sign is SignClass.NEGATIVE
    assert score < 0
    certificate, score = minimum_minor(GridSample.from_matrix(PASCAL), principal_only=True)
    assert certificate.sign is SignClass.POSITIVE
