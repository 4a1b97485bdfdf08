from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import (
    BudgetExceededError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    GridError,
    InconsistentInputError,
    PreconditionError,
)
from numerics_core import SignClass, to_float
from pf_densities import Gamma, OmegaQR, Wallis
from preserver_lab import (
    Classification,
    PowerSweepConfig,
    PreserverFamily,
    ShiftSearch,
    arithmetic_grid,
    arithmetic_progression_power,
    falsify_preserver,
    gamma_sweep,
    geometric_grid,
    hw_poly_rigidity,
    karlin_sweep,
    lambda_d_boundary,
    maclaurin_of,
    mbeta_power_test,
    moments_of,
    predicted_nonnegative,
    recover_from_maclaurin,
    recover_from_moments,
    reproduce_witness,
    uniform_grid,
    wallis_scales,
    wallis_sweep,
)
from symfunc import ParamVector

TOLERANCE = mpmath.mpf("1e-20")


def assert_params(recovered, expected, tolerance=TOLERANCE):
    assert recovered.m == len(expected)
    for got, want in zip(recovered.alpha, expected):
        assert abs(to_float(got) - to_float(want)) < tolerance


def assert_witness_reproduces(row):
    certificate = reproduce_witness(row)
    assert certificate is not None
    assert certificate.sign is SignClass.NEGATIVE
    assert certificate.det_value == row.witness.det_value


def test_grid_builders():
    assert arithmetic_grid(3, "0.5") == (0, Fraction(1, 2), 1)
    assert geometric_grid(3) == (1, 2, 4)
    assert uniform_grid(3, -1, 1) == (-1, 0, 1)
    with pytest.raises(GridError):
        arithmetic_grid(0)
    with pytest.raises(GridError):
        arithmetic_grid(3, 0)
    with pytest.raises(GridError):
        geometric_grid(3, 1)
    with pytest.raises(GridError):
        uniform_grid(2, 1, 1)


@pytest.mark.parametrize(
    ("kind", "exponent", "p", "expected"),
    [
        ("karlin", 1, 3, True),
        ("karlin", "0.5", 3, False),
        ("karlin", "1.5", 3, True),
        ("karlin", "0.5", 2, True),
        ("wallis", 2, 5, True),
        ("wallis", "2.5", 5, False),
        ("gamma", "0.5", 2, False),
        ("gamma", "1.5", 2, True),
        ("gamma", 2, 4, True),
        ("lambda-d", "0.5", 3, True),
        ("lambda-d", 2, 3, False),
        ("lambda-d", -1, 3, False),
        ("mbeta", 1, 3, True),
        ("mbeta", 2, 3, False),
    ],
)
def test_predicted_nonnegative(kind, exponent, p, expected):
    assert predicted_nonnegative(kind, exponent, p) is expected


def test_predicted_nonnegative_rejects_unknown_kind():
    with pytest.raises(DomainError):
        predicted_nonnegative("laplace", 1, 2)


def test_shift_search_default_range():
    search = ShiftSearch(points=5)
    xs = ys = (0, 1, 2)
    assert search.bounds(xs, ys) == (-6, 2)
    assert search.candidates(xs, ys) == [-6, -4, -2, 0, 2]
    with pytest.raises(DomainError):
        ShiftSearch(lower=1, upper=0)
    with pytest.raises(DomainError):
        ShiftSearch(points=1)


def test_power_sweep_config_validation():
    with pytest.raises(DomainError):
        PowerSweepConfig(OmegaQR(1, 1), (), 3)
    with pytest.raises(DomainError):
        PowerSweepConfig(OmegaQR(1, 1), (0,), 3)
    with pytest.raises(GridError):
        PowerSweepConfig(OmegaQR(1, 1), (1,), 2, xs=(1, 0))
    cfg = PowerSweepConfig(OmegaQR(1, 1), ("0.5",), 3)
    assert cfg.xs == cfg.ys == (0, 1, 2)
    assert cfg.exponents == (Fraction(1, 2),)


def test_karlin_sweep_preconditions():
    with pytest.raises(PreconditionError):
        karlin_sweep(PowerSweepConfig(Gamma(1), (1,), 2))
    with pytest.raises(GridError):
        karlin_sweep(PowerSweepConfig(OmegaQR(1, 1), (1,), 3, xs=(0, 1), ys=(0, 1)))


def test_karlin_sweep_on_the_default_exact_grid():
    search = ShiftSearch(points=9, refinement_depth=2)
    report = karlin_sweep(PowerSweepConfig(OmegaQR(1, 1), (1,), 2, shift_search=search))
    (row,) = report.rows
    assert row.classification in (Classification.TN, Classification.TP_WITNESS)
    assert row.matches_prediction


def test_gamma_sweep_on_the_default_exact_grid():
    report = gamma_sweep(["2"], 2, shift_search=ShiftSearch(points=9, refinement_depth=2))
    (row,) = report.rows
    assert row.classification in (Classification.TN, Classification.TP_WITNESS)
    assert row.matches_prediction


@pytest.mark.slow
def test_karlin_sweep_finds_principal_witness_below_threshold():
    report = karlin_sweep(PowerSweepConfig(OmegaQR(1, 1), ("0.5", 1), 3))
    assert report.kind == "karlin"
    low, high = report.rows
    assert low.exponent == Fraction(1, 2)
    assert low.classification is Classification.NEGATIVE_PRINCIPAL_MINOR
    assert low.witness.principal
    assert low.transform == "shift"
    assert not low.predicted_nonnegative
    assert low.matches_prediction
    assert_witness_reproduces(low)
    assert high.classification in (Classification.TN, Classification.TP_WITNESS)
    assert high.matches_prediction


def test_wallis_scales_stay_inside_the_support():
    scales = wallis_scales((0, 1, 2), (0, 1, 2), 5)
    assert len(scales) == 5
    assert scales[0] * 2 < mpmath.pi / 2
    assert abs(scales[-1] * 100 - scales[0]) < mpmath.mpf("1e-30")
    assert scales == sorted(scales, reverse=True)


def test_wallis_sweep_requires_wallis_base():
    with pytest.raises(PreconditionError):
        wallis_sweep(PowerSweepConfig(OmegaQR(1, 1), (1,), 2))


@pytest.mark.slow
def test_wallis_sweep_rows():
    report = wallis_sweep(PowerSweepConfig(Wallis(), ("0.5", 1), 3))
    low, high = report.rows
    assert high.classification.non_negative
    assert high.transform == "scale"
    assert low.classification is Classification.NEGATIVE_PRINCIPAL_MINOR
    assert low.witness.principal
    assert_witness_reproduces(low)
    assert [row.matches_prediction for row in report.rows] == [True, True]


@pytest.mark.slow
def test_gamma_sweep_detects_log_convex_shapes():
    report = gamma_sweep(["0.5", 2], 2)
    low, high = report.rows
    assert low.classification is Classification.NEGATIVE_MINOR
    assert_witness_reproduces(low)
    assert high.classification is Classification.TN
    assert [row.matches_prediction for row in report.rows] == [True, True]


def _karlin_exponents(p):
    threshold = p - 2
    candidates = {Fraction(1, 4), Fraction(1), Fraction(4 * threshold + 1, 4)}
    if threshold >= 1:
        candidates |= {Fraction(4 * threshold - 1, 4), Fraction(threshold)}
    return tuple(sorted(candidates))


@pytest.mark.slow
@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_karlin_table_matches_the_threshold(p):
    report = karlin_sweep(PowerSweepConfig(OmegaQR(1, 2), _karlin_exponents(p), p))
    assert Classification.INCONCLUSIVE not in report.classifications
    assert all(row.matches_prediction for row in report.rows)
    for row in report.rows:
        if not row.classification.non_negative:
            assert_witness_reproduces(row)


@pytest.mark.slow
@pytest.mark.parametrize("p", [3, 4])
def test_gamma_table_matches_the_threshold(p):
    report = gamma_sweep(["0.5", 1, "1.5", 2, "2.5", 3, "3.5"], p)
    assert Classification.INCONCLUSIVE not in report.classifications
    assert all(row.matches_prediction for row in report.rows)


def test_lambda_d_boundary():
    report = lambda_d_boundary([2, 1, "0.5", 0], 3)
    assert [row.exponent for row in report.rows] == [0, Fraction(1, 2), 1, 2]
    assert report.classifications == [
        Classification.TN,
        Classification.TN,
        Classification.TN,
        Classification.NEGATIVE_MINOR,
    ]
    failing = report.rows[-1]
    assert failing.transform == "grid"
    assert failing.witness.order == 2
    assert_witness_reproduces(failing)


def test_lambda_d_on_the_two_point_grid():
    report = lambda_d_boundary([3], 2, xs=(1, 2), ys=(0, 1))
    (row,) = report.rows
    expected = -2 * mpmath.exp(-2)
    assert abs(row.witness.det_value - expected) < TOLERANCE


def test_mbeta_first_power_is_tn():
    result = mbeta_power_test(1, 1, 3)
    assert result.status == "TN"
    assert result.grids_tested > 0
    assert result.base_report.holds


def test_mbeta_budget_overrun_before_any_grid_propagates():
    with pytest.raises(BudgetExceededError):
        mbeta_power_test(1, 2, 3, budget=1)


@pytest.mark.slow
def test_mbeta_square_status_is_never_tn():
    result = mbeta_power_test(1, 2, 3)
    assert result.status in ("NegativeMinor", "Inconclusive")
    if result.status == "NegativeMinor":
        assert result.report.witness.sign is SignClass.NEGATIVE
        assert result.base_report.holds


@pytest.mark.slow
@pytest.mark.parametrize("beta", [1, 3])
def test_mbeta_square_fails_at_order_five(beta):
    result = mbeta_power_test(beta, 2, 5)
    assert result.status == "NegativeMinor"
    assert result.report.witness.sign is SignClass.NEGATIVE
    assert result.base_report.holds


def test_mbeta_argument_checks():
    with pytest.raises(DomainError):
        mbeta_power_test(1, 0, 3)
    with pytest.raises(DomainError):
        mbeta_power_test(1, 1, 1)


@pytest.mark.parametrize("coeffs", [(0, 2), (3,)])
def test_rigidity_accepts_homotheties_and_constants(coeffs):
    result = hw_poly_rigidity(ParamVector.of(1, 2, 3), coeffs, order=3, grid_steps=("0.5",))
    assert result.status == "TN"


def test_rigidity_needs_three_parameters():
    with pytest.raises(PreconditionError):
        hw_poly_rigidity(ParamVector.of(1, 2), (0, 0, 1))


@pytest.mark.slow
def test_rigidity_square_is_not_reported_tn():
    result = hw_poly_rigidity(ParamVector.of(1, 2, 3), (0, 0, 1), order=4)
    assert result.status in ("NegativeMinor", "Inconclusive")


@pytest.mark.slow
def test_rigidity_finds_a_negative_minor_for_the_square():
    result = hw_poly_rigidity(ParamVector.of(1, 2, 5), (0, 0, 1), order=4)
    assert result.status == "NegativeMinor"
    assert result.report.witness.sign is SignClass.NEGATIVE


@pytest.mark.parametrize(
    ("moments", "expected"),
    [(["3", "14"], (1, 2)), ([2, 6], (1, 1))],
)
def test_recover_from_moments(moments, expected):
    result = recover_from_moments(moments, 2)
    assert_params(result.recovered, expected, mpmath.mpf("1e-15"))
    assert result.residual < mpmath.mpf("1e-20")


def test_recover_from_moments_rejects_non_pf_moments():
    with pytest.raises(InconsistentInputError):
        recover_from_moments([1, 5], 2)
    with pytest.raises(DimensionError):
        recover_from_moments([1], 2)


def test_moments_round_trip_through_recovery():
    params = ParamVector.of(Fraction(1, 3), 1, 2)
    assert moments_of(ParamVector.of(1, 2), 2) == [3, 14]
    result = recover_from_moments(moments_of(params, 3), 3)
    assert_params(result.recovered, (Fraction(1, 3), 1, 2))


REPEATABLE = ("0.25", "0.5", "1", "2", "3", "5")
repeated_params = st.one_of(
    st.lists(st.sampled_from(REPEATABLE), min_size=1, max_size=5),
    st.tuples(st.sampled_from(REPEATABLE), st.integers(1, 5)).map(lambda t: [t[0]] * t[1]),
)


def _mpf_params(values):
    return ParamVector(tuple(mpmath.mpf(v) for v in values))


@settings(max_examples=40, deadline=None)
@given(repeated_params)
def test_recovery_from_moments_handles_repeated_parameters(values):
    params = _mpf_params(values)
    result = recover_from_moments(moments_of(params, params.m), params.m)
    assert_params(result.recovered, sorted(params.alpha), mpmath.mpf("1e-8"))


@settings(max_examples=40, deadline=None)
@given(repeated_params)
def test_recovery_from_maclaurin_handles_repeated_parameters(values):
    params = _mpf_params(values)
    result = recover_from_maclaurin(maclaurin_of(params), params.m)
    assert_params(result.recovered, sorted(params.alpha), mpmath.mpf("1e-8"))


@pytest.mark.parametrize(
    ("coefficients", "expected"),
    [([1, -2, 3], (1, 1)), ([2, -6, 14], (Fraction(1, 2), 1))],
)
def test_recover_from_maclaurin(coefficients, expected):
    result = recover_from_maclaurin(coefficients, 2)
    assert_params(result.recovered, expected, mpmath.mpf("1e-15"))


def test_recover_from_maclaurin_checks_input():
    with pytest.raises(DegenerateInputError):
        recover_from_maclaurin([0, 1, 1], 2)
    with pytest.raises(DimensionError):
        recover_from_maclaurin([1, -2], 2)
    assert maclaurin_of(ParamVector.of(1, 1)) == [1, -2, 3]


def test_arithmetic_progression_power():
    recovered, report, residual = arithmetic_progression_power(
        ParamVector.of(1, Fraction(1, 2)), 2
    )
    assert_params(recovered, (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2)))
    assert report.holds
    assert residual < mpmath.mpf("1e-20")


def test_arithmetic_progression_power_repeated_parameter():
    recovered, report, _ = arithmetic_progression_power(ParamVector.of(1, 1), 2)
    assert_params(recovered, (Fraction(1, 2),) * 3, mpmath.mpf("1e-8"))
    assert report.holds


def test_arithmetic_progression_power_needs_progression():
    with pytest.raises(PreconditionError):
        arithmetic_progression_power(ParamVector.of(1, Fraction(1, 2), Fraction(1, 4)), 2)


@pytest.mark.parametrize(
    ("family", "order", "expected"),
    [
        (PreserverFamily.power(1, 1), 5, True),
        (PreserverFamily.power(2, "0.5"), 2, True),
        (PreserverFamily.power(1, "0.5"), 3, False),
        (PreserverFamily.power(1, 2), 3, True),
        (PreserverFamily.power(1, 2), 4, False),
        (PreserverFamily.power(-1, 1), 2, False),
        (PreserverFamily.constant(0), 4, True),
        (PreserverFamily.indicator_positive(1), 4, True),
        (PreserverFamily.affine(0, 3), 4, True),
        (PreserverFamily.affine("0.1", 1), 2, False),
        (PreserverFamily.affine("0.1", 1), 1, True),
    ],
)
def test_predicted_preserver(family, order, expected):
    assert family.predicted_preserver(order) is expected


def test_preserver_family_validation():
    with pytest.raises(DomainError):
        PreserverFamily("log", (1,))
    with pytest.raises(DimensionError):
        PreserverFamily("power", (1,))
    with pytest.raises(DomainError):
        PreserverFamily.power(1, 0)
    assert PreserverFamily.power(1, "0.5").describe() == "power(1, 1/2)"


def test_falsify_rejects_unknown_grid_class():
    with pytest.raises(DomainError):
        falsify_preserver(PreserverFamily.power(1, 1), grid_class="any-grid")


def test_falsify_budget_overrun_is_inconclusive():
    result = falsify_preserver(PreserverFamily.power(1, "0.5"), budget=1)
    assert result.status == "Inconclusive"
    assert result.note


@pytest.mark.slow
@pytest.mark.parametrize(
    "family", [PreserverFamily.power(1, "0.5"), PreserverFamily.affine("0.1", 1)]
)
def test_falsify_finds_counterexamples(family):
    result = falsify_preserver(family, order=3)
    assert result.status == "Counterexample"
    assert not result.predicted_preserver
    assert result.report.witness.sign is SignClass.NEGATIVE


@pytest.mark.slow
@pytest.mark.parametrize(
    "family",
    [PreserverFamily.power(1, 2), PreserverFamily.power(3, 1), PreserverFamily.constant(2)],
)
def test_predicted_preservers_survive(family):
    result = falsify_preserver(family, order=3)
    assert result.status == "Survived"
    assert result.grids_tested > 0


@pytest.mark.slow
def test_falsify_square_fails_at_order_four():
    result = falsify_preserver(PreserverFamily.power(1, 2), order=4)
    assert result.status == "Counterexample"
    assert not result.predicted_preserver
    assert result.report.witness.sign is SignClass.NEGATIVE
