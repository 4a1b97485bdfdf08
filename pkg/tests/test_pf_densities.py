import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DegenerateInputError, DimensionError, DomainError, RequiresDistinctError
from numerics_core import to_float, working_precision
from pf_densities import (
    FAMILIES,
    HW,
    EvalResult,
    Gamma,
    Gauss,
    Heaviside,
    IndicatorOf,
    LambdaD,
    MBeta,
    OmegaQR,
    PolyOf,
    PowerOf,
    Wallis,
    evaluate,
    hciz_density_cross_check,
    hciz_det,
    hciz_series,
    hw_derivatives_at_zero,
    hw_eval_additive,
    hw_eval_determinantal,
    hw_eval_series,
    hw_laplace,
    hw_mgf_partial_sum,
    hw_moment,
    kernel_from_json,
)
from symfunc import ParamVector

INV_E = "0.36787944117144232159552377016146086744581113103176"

DISTINCT_VECTORS = [
    (1, 2),
    ("0.5", 3, 7),
    ("0.1", "0.4", 2, 10),
    ("0.25", 1, "1.5", 4, 9),
]


def _close(value, expected, tol="1e-25"):
    return abs(to_float(value) - to_float(expected)) <= mpmath.mpf(tol)


@pytest.mark.parametrize(
    "text,x,expected",
    [
        ('{"family":"HW","params":{"alpha":[1,1]}}', 1, INV_E),
        ('{"family":"Wallis"}', 0, 1),
        ('{"family":"LambdaD","params":{"d":0.5}}', 0, Fraction(1, 2)),
        ('{"family":"Heaviside"}', 0, 1),
        ('{"family":"Heaviside"}', "-0.5", 0),
        ('{"family":"OmegaQR","params":{"q":1,"r":1}}', 1, INV_E),
        ('{"family":"MBeta","params":{"beta":1}}', 0, 1),
    ],
)
def test_evaluate_documented_values(text, x, expected):
    result = evaluate(kernel_from_json(text), x)
    assert _close(result.value, expected)
    assert result.abs_error_bound <= mpmath.mpf("1e-30")


def test_hw_vanishes_left_of_zero():
    assert evaluate(HW(ParamVector.of(1, 2)), -1) == EvalResult.exact(0)


def test_single_parameter_hw_is_an_exponential_with_jump():
    spec = HW(ParamVector.of(2))
    assert evaluate(spec, 0).value == Fraction(1, 2)
    assert _close(evaluate(spec, 1).value, mpmath.exp(-0.5) / 2)
    assert spec.discontinuity_points == frozenset({0})


def test_repeated_parameters_use_the_series():
    assert _close(evaluate(HW(ParamVector.of(1, 1, 1)), 2).value, 2 * mpmath.exp(-2))
    with pytest.raises(RequiresDistinctError):
        hw_eval_additive(ParamVector.of(1, 1), 1)
    with pytest.raises(RequiresDistinctError):
        hw_eval_determinantal(ParamVector.of(1, 1), 1)


@pytest.mark.parametrize("alpha", DISTINCT_VECTORS)
@pytest.mark.parametrize("x", [0, "0.5", 3, 11, 20])
def test_hw_representations_agree(alpha, x):
    p = ParamVector(alpha)
    additive = hw_eval_additive(p, x)
    series = hw_eval_series(p, x, "1e-30")
    assert abs(additive.value - series.value) <= mpmath.mpf("1e-10")
    if x != 0:
        determinantal = hw_eval_determinantal(p, x)
        assert abs(additive.value - determinantal.value) <= mpmath.mpf("1e-9")


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=8),
        min_size=1,
        max_size=5,
        unique=True,
    ),
    st.fractions(min_value=0, max_value=20, max_denominator=4),
)
def test_additive_and_series_agree_on_random_vectors(alpha, x):
    p = ParamVector(tuple(alpha))
    additive = hw_eval_additive(p, x)
    series = hw_eval_series(p, x, "1e-20")
    assert abs(additive.value - series.value) <= mpmath.mpf("1e-10")
    assert additive.value >= -additive.abs_error_bound


def test_series_requires_positive_tolerance_and_nonnegative_x():
    p = ParamVector.of(1, 2)
    with pytest.raises(DomainError):
        hw_eval_series(p, 1, 0)
    with pytest.raises(DomainError):
        hw_eval_series(p, -1, "1e-10")


@pytest.mark.parametrize("alpha", [(1, 2), ("0.5", 1, 3)])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_moments_match_quadrature(alpha, k):
    p = ParamVector(alpha)
    with working_precision(64):
        integral = mpmath.quad(lambda x: x**k * _hw_value(p, x), [0, 5, 20, mpmath.inf])
    assert abs(integral / to_float(hw_moment(p, k)) - 1) < 1e-6


def _hw_value(p, x):
    return evaluate(HW(p), x).value


def test_moments_are_exact():
    p = ParamVector.of(1, 2)
    assert hw_moment(p, 1) == 3
    assert hw_moment(p, 2) == 14
    assert hw_moment(p, 0) == 1


def test_laplace_transform():
    p = ParamVector.of(1, 2)
    assert hw_laplace(p, 1) == Fraction(1, 6)
    value = hw_laplace(p, 1j)
    assert abs(value - 1 / ((1 + 1j) * (1 + 2j))) < 1e-30
    with pytest.raises(DomainError):
        hw_laplace(p, -1)


def test_mgf_partial_sum_converges_to_product():
    result = hw_mgf_partial_sum(ParamVector.of(1, 2), "0.1", 60)
    limit = mpmath.mpf(1) / (mpmath.mpf("0.9") * mpmath.mpf("0.8"))
    assert abs(to_float(result.value) - limit) <= result.abs_error_bound + mpmath.mpf("1e-30")


def test_derivatives_at_zero():
    assert hw_derivatives_at_zero(ParamVector.of(1, 1), 2) == [1, -2, 3]
    assert hw_derivatives_at_zero(ParamVector.of(1, "1/2"), 2) == [2, -6, 14]


def test_gamma_behaviour_at_zero():
    assert Gamma("0.5").evaluate(0).unbounded
    assert Gamma(1).evaluate(0).value == 1
    assert Gamma(3).evaluate(0).value == 0
    assert _close(Gamma(3).evaluate(2).value, 2 * mpmath.exp(-2))
    with pytest.raises(DomainError):
        Gamma(0)


def test_omega_near_equal_parameters_are_continuous():
    equal = OmegaQR(1, 1).evaluate(1).value
    near = OmegaQR(1, "1.000001").evaluate(1).value
    assert abs(equal - near) < mpmath.mpf("1e-5")


def test_omega_distinct_parameters_closed_form():
    value = OmegaQR(1, 2).evaluate(1).value
    assert _close(value, mpmath.exp(-0.5) - mpmath.exp(-1))


def test_wallis_support():
    assert Wallis().evaluate(2).value == 0
    assert _close(Wallis().evaluate(1).value, mpmath.cos(1), "1e-30")


def test_wallis_vanishes_exactly_at_the_support_edge():
    for edge in (mpmath.pi / 2, -mpmath.pi / 2):
        result = Wallis().evaluate(edge)
        assert result.value == 0
        assert result.abs_error_bound == 0


def test_mbeta_and_gauss_are_even():
    for spec in (MBeta(3), Gauss()):
        assert spec.evaluate("0.7").value == spec.evaluate("-0.7").value


def test_power_of_negative_values_is_rejected():
    with pytest.raises(DomainError):
        PowerOf(PolyOf(Gauss(), (-1,)), 2).evaluate(0)
    with pytest.raises(DomainError):
        PowerOf(Gauss(), 0)


def test_power_and_poly_compositions():
    squared = PowerOf(LambdaD(Fraction(1, 2)), 2)
    assert squared.evaluate(0) == EvalResult.exact(Fraction(1, 4))
    shifted = PolyOf(Heaviside(), ("0.1", 1))
    assert shifted.evaluate(-1).value == Fraction(1, 10)
    assert PolyOf(Heaviside(), (0, 2)).is_homothety
    assert not shifted.is_homothety


def test_indicator_of():
    spec = IndicatorOf(LambdaD(0), 3)
    assert spec.evaluate(0).value == 0
    assert spec.evaluate(1).value == 3


def test_kernel_json_round_trip_of_nested_kernel():
    spec = PolyOf(PowerOf(OmegaQR(1, 2), Fraction(1, 2)), (0, 3))
    assert kernel_from_json(spec.describe()) == spec
    assert set(FAMILIES) >= {"HW", "Gamma", "PowerOf", "IndicatorOf"}


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        '{"family":"Cauchy"}',
        '{"family":"HW","params":{}}',
        '{"family":"LambdaD","params":{"d":true}}',
        '{"family":["HW"]}',
        "[1, 2]",
    ],
)
def test_kernel_from_json_rejects_bad_input(text):
    with pytest.raises(DomainError):
        kernel_from_json(text)


def test_hciz_det_matches_rank_one_series_for_two_by_two():
    a = [1, 2]
    x = mpmath.mpf("0.7")
    det_value = hciz_det(a, [x, 0])
    series = hciz_series(a, x, 200)
    assert abs(det_value.value - series.value) < 1e-20


def test_hciz_det_near_rank_one_agrees_with_series():
    a = ["0.5", 1, 3]
    x = mpmath.mpf("1.3")
    with working_precision(512):
        det_value = hciz_det(a, [x, mpmath.mpf("1e-30"), 0])
        series = hciz_series(a, x, 200)
        assert abs(det_value.value - series.value) < 1e-8


def test_hciz_det_input_checks():
    with pytest.raises(DimensionError):
        hciz_det([1, 2], [1])
    with pytest.raises(DegenerateInputError):
        hciz_det([1, 1], [0, 1])


def test_hciz_series_reports_missing_tail_bound():
    result = hciz_series([10], 50, 5)
    assert result.unbounded


@pytest.mark.parametrize("t", ["0.5", 1, 2])
def test_hciz_density_relation(t):
    lhs, rhs = hciz_density_cross_check([1, 2, 4], t)
    assert abs(lhs.value - rhs.value) < 1e-8


def test_smoothness_metadata():
    assert HW(ParamVector.of(1, 2, 3)).smoothness_class == 1
    assert LambdaD(1).smoothness_class == -1
    assert Gauss().smoothness_class == math.inf
