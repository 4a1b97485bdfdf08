"""Experiment drivers built on tp_check.

Power sweeps (Karlin shifts, Wallis scales, gamma densities), the lambda_d
boundary, M_beta power failure, Hirschman-Widder polynomial rigidity, preserver
falsification, and parameter recovery from moments or Maclaurin coefficients.

Searches are deterministic: the same inputs always visit the same shifts, scales
and grids in the same order. A witness the threshold theorems guarantee but the
search did not find is reported as ``Inconclusive``, never as ``TN``.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import mpmath

from errors import (
    BudgetExceededError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    GridError,
    PreconditionError,
    SamplingError,
)
from numerics_core import (
    Scalar,
    SignClass,
    is_exact,
    real_roots_monic,
    to_float,
    working_precision,
)
from pf_densities import (
    HW,
    Gamma,
    Gauss,
    Heaviside,
    IndicatorOf,
    KernelSpec,
    LambdaD,
    MBeta,
    OmegaQR,
    PolyOf,
    PowerOf,
    Wallis,
    hw_derivatives_at_zero,
    hw_moment,
)
from symfunc import ParamVector, SymPolyTable, as_scalar, h_to_e
from tp_check import (
    DEFAULT_MINOR_BUDGET,
    GridSample,
    MinorBudget,
    MinorCertificate,
    TnReport,
    check_tn,
    check_tp,
    evaluate_minor,
    minimum_minor,
    require_increasing,
    sample,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_GRID_STEPS = ("0.1", "0.25", "0.5", "1")
DEFAULT_SHIFT_POINTS = 200
DEFAULT_REFINEMENT_DEPTH = 40
RECOVERY_PRECISION_BITS = 256
AP_TOLERANCE = 1e-10
SLOW_ROW_MS = 1000.0
TN_SUBSAMPLE = 10
TP_SAMPLES = 5
REFINED_MINIMA = 3
WALLIS_MARGIN = 0.999
WALLIS_SCALE_RANGE = 100
MBETA_STEPS = ("1", "0.5", "0.25", "0.1", "0.05", "0.02")
FALSIFY_STEPS = ("0.25", "0.5", "1")
SMALL_MINOR_GUARD_BITS = 16
GOLDEN = (math.sqrt(5) - 1) / 2


class Classification(enum.Enum):
    TP_WITNESS = "TP_witness"
    TN = "TN"
    NEGATIVE_MINOR = "NegativeMinor"
    NEGATIVE_PRINCIPAL_MINOR = "NegativePrincipalMinor"
    INCONCLUSIVE = "Inconclusive"

    @property
    def non_negative(self) -> bool:
        return self in (Classification.TP_WITNESS, Classification.TN)


# ---------------------------------------------------------------------------
# Grids and predicted threshold sets
# ---------------------------------------------------------------------------


def arithmetic_grid(n: int, step: Any = 1, start: Any = 0) -> tuple[Scalar, ...]:
    """start, start + step, ..., n points."""
    if n < 1:
        raise GridError(f"A grid needs at least one point, got {n}")
    step, start = as_scalar(step), as_scalar(start)
    if not step > 0:
        raise GridError(f"Grid step must be positive, got {step}")
    return tuple(start + i * step for i in range(n))


def geometric_grid(n: int, ratio: Any = 2, start: Any = 1) -> tuple[Scalar, ...]:
    if n < 1:
        raise GridError(f"A grid needs at least one point, got {n}")
    ratio, start = as_scalar(ratio), as_scalar(start)
    if not (ratio > 1 and start > 0):
        raise GridError(f"Geometric grids need ratio > 1 and start > 0, got {ratio}, {start}")
    return tuple(start * ratio**i for i in range(n))


def uniform_grid(n: int, lower: Any, upper: Any) -> tuple[Scalar, ...]:
    """n evenly spaced points from lower to upper inclusive."""
    lower, upper = as_scalar(lower), as_scalar(upper)
    if n < 1:
        raise GridError(f"A grid needs at least one point, got {n}")
    if n == 1:
        return (lower,)
    if not upper > lower:
        raise GridError(f"Need lower < upper, got {lower} and {upper}")
    return tuple(lower + (upper - lower) * i / (n - 1) for i in range(n))


def _is_integer(value: Scalar) -> bool:
    if is_exact(value):
        return Fraction(value).denominator == 1
    return mpmath.isint(value)


def predicted_nonnegative(kind: str, exponent: Any, p: int) -> bool:
    """Whether the threshold theorems rule out a negative minor of order <= p."""
    e = as_scalar(exponent)
    if kind in {"karlin", "wallis"}:
        return (_is_integer(e) and e >= 0) or e >= p - 2
    if kind == "gamma":
        return (_is_integer(e) and e > 0) or e > p - 1
    if kind == "lambda-d":
        return 0 <= e <= 1
    if kind == "mbeta":
        return e == 1
    raise DomainError(f"Unknown sweep kind {kind!r}")


# ---------------------------------------------------------------------------
# Sweep configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftSearch:
    """Coarse shift grid over [lower, upper] plus golden-section refinement.

    Unset bounds default to [2 D0 - D1, D1] with D0 = min x - max y and
    D1 = max x - min y, which reaches into the region where every sampled
    difference is positive.
    """

    lower: Scalar | None = None
    upper: Scalar | None = None
    points: int = DEFAULT_SHIFT_POINTS
    refinement_depth: int = DEFAULT_REFINEMENT_DEPTH

    def __post_init__(self):
        if self.points < 2:
            raise DomainError(f"Shift search needs at least 2 points, got {self.points}")
        if self.refinement_depth < 0:
            raise DomainError(f"Refinement depth must be >= 0, got {self.refinement_depth}")
        if self.lower is not None and self.upper is not None and not self.upper > self.lower:
            raise DomainError(f"Empty shift range [{self.lower}, {self.upper}]")

    def bounds(self, xs: Sequence[Scalar], ys: Sequence[Scalar]) -> tuple[mpmath.mpf, mpmath.mpf]:
        d0 = to_float(min(xs) - max(ys))
        d1 = to_float(max(xs) - min(ys))
        lower = to_float(as_scalar(self.lower)) if self.lower is not None else 2 * d0 - d1
        upper = to_float(as_scalar(self.upper)) if self.upper is not None else d1
        return lower, upper

    def candidates(self, xs: Sequence[Scalar], ys: Sequence[Scalar]) -> list[mpmath.mpf]:
        lower, upper = self.bounds(xs, ys)
        n = self.points
        return [lower + (upper - lower) * i / (n - 1) for i in range(n)]


@dataclass(frozen=True)
class PowerSweepConfig:
    base: KernelSpec
    exponents: tuple[Scalar, ...]
    p: int
    xs: tuple[Scalar, ...] | None = None
    ys: tuple[Scalar, ...] | None = None
    shift_search: ShiftSearch = field(default_factory=ShiftSearch)
    budget: int = DEFAULT_MINOR_BUDGET
    grid_steps: tuple[Any, ...] = DEFAULT_GRID_STEPS

    def __post_init__(self):
        if self.p < 1:
            raise DomainError(f"Order must be at least 1, got {self.p}")
        exponents = tuple(as_scalar(e) for e in self.exponents)
        if not exponents:
            raise DomainError("A sweep needs at least one exponent")
        for e in exponents:
            if not e > 0:
                raise DomainError(f"Exponents must be positive, got {e}")
        xs = arithmetic_grid(self.p) if self.xs is None else tuple(as_scalar(v) for v in self.xs)
        ys = arithmetic_grid(self.p) if self.ys is None else tuple(as_scalar(v) for v in self.ys)
        require_increasing(xs, "xs")
        require_increasing(ys, "ys")
        if self.budget < 1:
            raise DomainError(f"Minor budget must be positive, got {self.budget}")
        object.__setattr__(self, "exponents", exponents)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "grid_steps", tuple(as_scalar(s) for s in self.grid_steps))


@dataclass(frozen=True)
class SweepRow:
    """One exponent (or d) of a sweep, with everything needed to rebuild its witness.

    ``transform`` is "shift" (columns sampled at ys + a), "scale" (both grids
    multiplied by m) or "grid" (grids used as given).
    """

    exponent: Scalar
    classification: Classification
    witness: MinorCertificate | None
    shift_or_scale: Scalar | None
    xs: tuple[Scalar, ...]
    ys: tuple[Scalar, ...]
    kernel: KernelSpec
    transform: str
    predicted_nonnegative: bool
    precision_bits: int
    note: str = ""

    @property
    def matches_prediction(self) -> bool:
        return self.classification.non_negative == self.predicted_nonnegative


@dataclass(frozen=True)
class PowerSweepReport:
    kind: str
    p: int
    rows: tuple[SweepRow, ...]
    base: KernelSpec | None = None

    @property
    def classifications(self) -> list[Classification]:
        return [row.classification for row in self.rows]


@dataclass(frozen=True)
class RecoveryResult:
    recovered: ParamVector
    residual: Scalar


@dataclass(frozen=True)
class WitnessSearchResult:
    """Outcome of a grid search: status is "TN", "NegativeMinor" or "Inconclusive"."""

    status: str
    report: TnReport
    xs: tuple[Scalar, ...]
    ys: tuple[Scalar, ...]
    kernel: KernelSpec
    base_report: TnReport | None = None
    grids_tested: int = 0
    precision_bits: int = 0


def _transformed_grids(
    xs: Sequence[Scalar], ys: Sequence[Scalar], transform: str, parameter: Scalar | None
) -> tuple[tuple[Scalar, ...], tuple[Scalar, ...]]:
    if transform in ("shift", "scale") and not is_exact(parameter):
        xs, ys = [to_float(x) for x in xs], [to_float(y) for y in ys]
    if transform == "shift":
        return tuple(xs), tuple(y + parameter for y in ys)
    if transform == "scale":
        return tuple(x * parameter for x in xs), tuple(y * parameter for y in ys)
    return tuple(xs), tuple(ys)


def row_sample(row: SweepRow) -> GridSample:
    """Rebuild the sample a row's witness was read from (at the row's precision)."""
    with working_precision(row.precision_bits):
        xs, ys = _transformed_grids(row.xs, row.ys, row.transform, row.shift_or_scale)
        return sample(row.kernel, xs, ys)


def reproduce_witness(row: SweepRow) -> MinorCertificate | None:
    if row.witness is None:
        return None
    with working_precision(row.precision_bits):
        g = row_sample(row)
        return evaluate_minor(g, row.witness.row_indices, row.witness.col_indices)


# ---------------------------------------------------------------------------
# Search engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Hit:
    parameter: Scalar
    sample: GridSample
    certificate: MinorCertificate


def _subsample(values: Sequence[Any], count: int) -> list[Any]:
    if len(values) <= count:
        return list(values)
    step = (len(values) - 1) / (count - 1)
    indices = sorted({round(i * step) for i in range(count)})
    return [values[i] for i in indices]


def _sample_with(
    kernel: KernelSpec, xs: Sequence[Scalar], ys: Sequence[Scalar], transform: str, parameter: Any
) -> GridSample:
    shifted_xs, shifted_ys = _transformed_grids(xs, ys, transform, parameter)
    return sample(kernel, shifted_xs, shifted_ys)


class _Objective:
    """Scores one shift or scale by its smallest scaled minor."""

    def __init__(
        self,
        build: Callable[[Any], GridSample],
        order: int,
        principal: bool,
        budget: MinorBudget,
    ):
        self.build = build
        self.order = order
        self.principal = principal
        self.budget = budget

    def __call__(self, parameter: Any) -> tuple[mpmath.mpf, _Hit | None]:
        try:
            g = self.build(parameter)
        except SamplingError:
            return mpmath.inf, None
        certificate, score = minimum_minor(
            g, self.order, principal_only=self.principal, budget=self.budget
        )
        if certificate.sign is SignClass.NEGATIVE:
            return score, _Hit(parameter, g, certificate)
        return score, None


def _golden_section(objective: _Objective, lower: Any, upper: Any, depth: int) -> _Hit | None:
    a, b = sorted((to_float(lower), to_float(upper)))
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, hit = objective(c)
    if hit:
        return hit
    fd, hit = objective(d)
    if hit:
        return hit
    for _ in range(depth):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc, hit = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd, hit = objective(d)
        if hit:
            return hit
    return None


def _search(objective: _Objective, candidates: Sequence[Any], depth: int) -> _Hit | None:
    """Coarse scan of the candidates, then golden-section refinement of the best minima."""
    scored = []
    for index, parameter in enumerate(candidates):
        score, hit = objective(parameter)
        if hit:
            return hit
        scored.append((score, index))
    scored.sort()
    for score, index in scored[:REFINED_MINIMA]:
        if score == mpmath.inf or depth == 0:
            break
        lower = candidates[max(index - 1, 0)]
        upper = candidates[min(index + 1, len(candidates) - 1)]
        hit = _golden_section(objective, lower, upper, depth)
        if hit:
            return hit
    return None


@dataclass(frozen=True)
class _SweepPlan:
    """Everything that distinguishes one sweep kind from another."""

    kind: str
    p: int
    transform: str
    principal: bool
    negative_label: Classification
    candidates: Callable[[tuple, tuple], list]
    tp_candidates: Callable[[tuple, tuple], list] | None
    precision_bits: Callable[[tuple, tuple], int]
    depth: int
    budget: int
    grids: tuple[tuple[tuple, tuple], ...]


def _row(plan: _SweepPlan, exponent, kernel, classification, predicted, **kwargs) -> SweepRow:
    xs, ys = kwargs.pop("grid", plan.grids[0])
    return SweepRow(
        exponent=exponent,
        classification=classification,
        witness=kwargs.pop("witness", None),
        shift_or_scale=kwargs.pop("parameter", None),
        xs=xs,
        ys=ys,
        kernel=kernel,
        transform=plan.transform,
        predicted_nonnegative=predicted,
        precision_bits=kwargs.pop("bits", mpmath.mp.prec),
        note=kwargs.pop("note", ""),
    )


def _sweep_row(plan: _SweepPlan, exponent: Scalar, kernel: KernelSpec) -> SweepRow:
    predicted = predicted_nonnegative(plan.kind, exponent, plan.p)
    budget = MinorBudget(plan.budget)
    grids = plan.grids if not predicted else plan.grids[:1]
    try:
        for xs, ys in grids:
            bits = plan.precision_bits(xs, ys)
            with working_precision(bits):
                build = functools.partial(_sample_with, kernel, xs, ys, plan.transform)
                candidates = plan.candidates(xs, ys)
                objective = _Objective(build, plan.p, plan.principal, budget)
                hit = _search(objective, candidates, plan.depth)
                if hit:
                    return _row(
                        plan, exponent, kernel, plan.negative_label, predicted,
                        grid=(xs, ys), witness=hit.certificate, parameter=hit.parameter, bits=bits,
                    )
                if plan.principal:
                    for parameter in _subsample(candidates, TN_SUBSAMPLE):
                        try:
                            report = check_tn(build(parameter), plan.p, budget)
                        except SamplingError:
                            continue
                        if not report.holds:
                            return _row(
                                plan, exponent, kernel, Classification.NEGATIVE_MINOR, predicted,
                                grid=(xs, ys), witness=report.witness, parameter=parameter,
                                bits=bits,
                            )
                if not predicted:
                    continue
                if plan.tp_candidates is not None:
                    for parameter in plan.tp_candidates(xs, ys):
                        g = build(parameter)
                        if g.matrix.rows != g.matrix.cols:
                            break
                        report = check_tp(g, plan.p, use_fekete=True, budget=budget)
                        if report.holds:
                            return _row(
                                plan, exponent, kernel, Classification.TP_WITNESS, predicted,
                                grid=(xs, ys), witness=report.witness, parameter=parameter,
                                bits=bits,
                            )
                return _row(plan, exponent, kernel, Classification.TN, predicted, bits=bits)
    except BudgetExceededError as exc:
        return _row(plan, exponent, kernel, Classification.INCONCLUSIVE, predicted, note=str(exc))
    return _row(
        plan, exponent, kernel, Classification.INCONCLUSIVE, predicted,
        note=f"no witness found on {len(grids)} grid(s)",
    )


def _run_sweep(plan: _SweepPlan, exponents: Sequence[Scalar], kernel_for, base) -> PowerSweepReport:
    rows = []
    for exponent in sorted(exponents):
        start_time = time.perf_counter()
        row = _sweep_row(plan, exponent, kernel_for(exponent))
        duration_ms = (time.perf_counter() - start_time) * 1000.0
        log_level = logging.INFO if duration_ms > SLOW_ROW_MS else logging.DEBUG
        LOGGER.log(
            log_level,
            "%s sweep p=%d exponent=%s -> %s (%.1f ms)",
            plan.kind,
            plan.p,
            exponent,
            row.classification.value,
            duration_ms,
        )
        if not row.matches_prediction and row.classification is not Classification.INCONCLUSIVE:
            LOGGER.warning(
                "%s sweep p=%d exponent=%s classified %s against the predicted threshold",
                plan.kind,
                plan.p,
                exponent,
                row.classification.value,
            )
        rows.append(row)
    return PowerSweepReport(plan.kind, plan.p, tuple(rows), base)


def _extra_grids(xs, ys, steps: Sequence[Scalar]) -> tuple[tuple[tuple, tuple], ...]:
    grids = [(tuple(xs), tuple(ys))]
    for step in steps:
        grid = arithmetic_grid(len(xs), step)
        candidate = (grid, arithmetic_grid(len(ys), step))
        if candidate not in grids:
            grids.append(candidate)
    return tuple(grids)


def _positive_region_shifts(search: ShiftSearch, xs, ys) -> list[mpmath.mpf]:
    lower, _ = search.bounds(xs, ys)
    d0 = to_float(min(xs) - max(ys))
    if not lower < d0:
        return []
    return [lower + (d0 - lower) * (i + 1) / (TP_SAMPLES + 1) for i in range(TP_SAMPLES)]


def _ambient_bits(xs, ys) -> int:
    return mpmath.mp.prec


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def karlin_sweep(cfg: PowerSweepConfig) -> PowerSweepReport:
    """Classify x -> OmegaQR(x - y - a)^exponent over shifts a, one row per exponent."""
    if not isinstance(cfg.base, OmegaQR):
        raise PreconditionError(f"karlin_sweep needs an OmegaQR base, got {cfg.base.family}")
    if len(cfg.xs) != cfg.p or len(cfg.ys) != cfg.p:
        raise GridError(f"karlin_sweep needs p={cfg.p} points per grid")
    search = cfg.shift_search
    plan = _SweepPlan(
        kind="karlin",
        p=cfg.p,
        transform="shift",
        principal=True,
        negative_label=Classification.NEGATIVE_PRINCIPAL_MINOR,
        candidates=search.candidates,
        tp_candidates=functools.partial(_positive_region_shifts, search),
        precision_bits=_ambient_bits,
        depth=search.refinement_depth,
        budget=cfg.budget,
        grids=_extra_grids(cfg.xs, cfg.ys, cfg.grid_steps),
    )
    return _run_sweep(plan, cfg.exponents, functools.partial(PowerOf, cfg.base), cfg.base)


def _wallis_span(xs, ys) -> mpmath.mpf:
    return max(to_float(max(xs) - min(ys)), to_float(max(ys) - min(xs)))


def wallis_scales(xs, ys, points: int) -> list[mpmath.mpf]:
    """Geometric scales from m_cap down to m_cap / 100, m_cap keeping |m(x - y)| < pi/2."""
    cap = WALLIS_MARGIN * (mpmath.pi / 2) / _wallis_span(xs, ys)
    return [
        cap * mpmath.power(WALLIS_SCALE_RANGE, -mpmath.mpf(i) / (points - 1))
        for i in range(points)
    ]


def _wallis_bits(p: int, xs, ys) -> int:
    cap = WALLIS_MARGIN * (mpmath.pi / 2) / _wallis_span(xs, ys)
    smallest = cap / WALLIS_SCALE_RANGE
    extra = max(0, int(mpmath.ceil(p * (p - 1) * mpmath.log(1 / smallest, 2))))
    return mpmath.mp.prec + extra + SMALL_MINOR_GUARD_BITS


def wallis_sweep(cfg: PowerSweepConfig) -> PowerSweepReport:
    """Classify W(m (x - y))^exponent over multiplicative scales m in (0, m_cap]."""
    if not isinstance(cfg.base, Wallis):
        raise PreconditionError(f"wallis_sweep needs the Wallis base, got {cfg.base.family}")
    if len(cfg.xs) != cfg.p or len(cfg.ys) != cfg.p:
        raise GridError(f"wallis_sweep needs p={cfg.p} points per grid")
    search = cfg.shift_search

    def scales(xs, ys):
        return wallis_scales(xs, ys, search.points)

    def tp_scales(xs, ys):
        return _subsample(wallis_scales(xs, ys, search.points), TP_SAMPLES)

    plan = _SweepPlan(
        kind="wallis",
        p=cfg.p,
        transform="scale",
        principal=True,
        negative_label=Classification.NEGATIVE_PRINCIPAL_MINOR,
        candidates=scales,
        tp_candidates=tp_scales,
        precision_bits=functools.partial(_wallis_bits, cfg.p),
        depth=search.refinement_depth,
        budget=cfg.budget,
        grids=((cfg.xs, cfg.ys),),
    )
    return _run_sweep(plan, cfg.exponents, functools.partial(PowerOf, cfg.base), cfg.base)


def gamma_sweep(
    exponents: Sequence[Any],
    p: int,
    xs: Sequence[Any] | None = None,
    ys: Sequence[Any] | None = None,
    shift_search: ShiftSearch | None = None,
    budget: int = DEFAULT_MINOR_BUDGET,
    grid_steps: Sequence[Any] = DEFAULT_GRID_STEPS,
) -> PowerSweepReport:
    """TN_p status of the Gamma(exponent) density, whose Laplace transform is (1 + s)^-exponent.

    Shifts that put a grid difference exactly at 0 are skipped for shapes below 1.
    """
    cfg = PowerSweepConfig(
        Gamma(1), tuple(exponents), p, xs, ys, shift_search or ShiftSearch(), budget, grid_steps
    )
    search = cfg.shift_search
    plan = _SweepPlan(
        kind="gamma",
        p=p,
        transform="shift",
        principal=False,
        negative_label=Classification.NEGATIVE_MINOR,
        candidates=search.candidates,
        tp_candidates=None,
        precision_bits=_ambient_bits,
        depth=search.refinement_depth,
        budget=cfg.budget,
        grids=_extra_grids(cfg.xs, cfg.ys, cfg.grid_steps),
    )
    return _run_sweep(plan, cfg.exponents, Gamma, None)


def lambda_d_boundary(
    ds: Sequence[Any],
    p: int,
    xs: Sequence[Any] | None = None,
    ys: Sequence[Any] | None = None,
    budget: int = DEFAULT_MINOR_BUDGET,
) -> PowerSweepReport:
    """TN_p check of lambda_d on grids through the jump at 0, one row per d.

    For d outside [0, 1] the two-point grid xs=(1, 2), ys=(0, 1) is added; there
    the 2x2 minor equals e^{-2}(1 - d).
    """
    if p < 1:
        raise DomainError(f"Order must be at least 1, got {p}")
    xs = arithmetic_grid(p) if xs is None else tuple(as_scalar(v) for v in xs)
    ys = arithmetic_grid(p) if ys is None else tuple(as_scalar(v) for v in ys)
    rows = []
    for d in sorted(as_scalar(v) for v in ds):
        start_time = time.perf_counter()
        kernel = LambdaD(d)
        predicted = predicted_nonnegative("lambda-d", d, p)
        grids = [(tuple(xs), tuple(ys))]
        if not predicted:
            grids.append(((1, 2), (0, 1)))
        row = None
        meter = MinorBudget(budget)
        try:
            for grid_xs, grid_ys in grids:
                report = check_tn(sample(kernel, grid_xs, grid_ys), p, meter)
                if not report.holds:
                    row = SweepRow(
                        d, Classification.NEGATIVE_MINOR, report.witness, None, grid_xs, grid_ys,
                        kernel, "grid", predicted, mpmath.mp.prec,
                    )
                    break
        except BudgetExceededError as exc:
            row = SweepRow(
                d, Classification.INCONCLUSIVE, None, None, tuple(xs), tuple(ys), kernel,
                "grid", predicted, mpmath.mp.prec, str(exc),
            )
        if row is None:
            label = Classification.TN if predicted else Classification.INCONCLUSIVE
            row = SweepRow(
                d, label, report.witness, None, tuple(xs), tuple(ys), kernel, "grid",
                predicted, mpmath.mp.prec,
            )
        LOGGER.debug(
            "lambda-d d=%s -> %s (%.1f ms)",
            d,
            row.classification.value,
            (time.perf_counter() - start_time) * 1000.0,
        )
        rows.append(row)
    return PowerSweepReport("lambda-d", p, tuple(rows))


# ---------------------------------------------------------------------------
# Witness searches on fixed kernels
# ---------------------------------------------------------------------------


def _small_step_bits(order: int, step: Scalar) -> int:
    extra = max(0, int(mpmath.ceil(order * (order - 1) * mpmath.log(1 / to_float(step), 2))))
    return mpmath.mp.prec + extra + SMALL_MINOR_GUARD_BITS


def _merged_steps(*groups: Sequence[Any]) -> list[Scalar]:
    steps = {as_scalar(s) for group in groups for s in group}
    return sorted(steps, reverse=True)


def mbeta_power_test(
    beta: Any,
    k: int,
    p: int,
    grid_steps: Sequence[Any] = DEFAULT_GRID_STEPS,
    budget: int = DEFAULT_MINOR_BUDGET,
) -> WitnessSearchResult:
    """Look for a negative minor of M_beta^k on symmetric grids that shrink towards 0.

    A budget overrun before the first grid is checked propagates; later ones give
    ``Inconclusive``.
    """
    if k < 1:
        raise DomainError(f"Power must be a positive integer, got {k}")
    if p < 2:
        raise DomainError(f"Order must be at least 2, got {p}")
    base = MBeta(beta)
    kernel = base if k == 1 else PowerOf(base, k)
    meter = MinorBudget(budget)
    first = None
    tested = 0
    try:
        for step in _merged_steps(MBETA_STEPS, grid_steps):
            xs = tuple(step * (i - Fraction(p - 1, 2)) for i in range(p))
            bits = _small_step_bits(p, step)
            for offset in (0, step / 2):
                ys = tuple(x + offset for x in xs)
                with working_precision(bits):
                    report = check_tn(sample(kernel, xs, ys), p, meter)
                    tested += 1
                    if not report.holds:
                        base_report = check_tn(sample(base, xs, ys), p, meter)
                        return WitnessSearchResult(
                            "NegativeMinor", report, xs, ys, kernel, base_report, tested, bits
                        )
                if first is None:
                    first = (report, xs, ys, bits)
    except BudgetExceededError as exc:
        if first is None:
            raise
        LOGGER.warning("mbeta_power_test stopped after %d grids: %s", tested, exc)
        report, xs, ys, bits = first
        return WitnessSearchResult(
            "Inconclusive", report, xs, ys, kernel, None, tested, bits
        )
    report, xs, ys, bits = first
    with working_precision(bits):
        base_report = check_tn(sample(base, xs, ys), p, meter)
    status = "TN" if k == 1 else "Inconclusive"
    return WitnessSearchResult(status, report, xs, ys, kernel, base_report, tested, bits)


def _poly_predicted_tn(kernel: PolyOf) -> bool:
    if kernel.is_homothety:
        return True
    nonzero = [i for i, c in enumerate(kernel.coeffs) if c != 0]
    return nonzero in ([], [0]) and kernel.coeffs[0] >= 0


def hw_poly_rigidity(
    params: ParamVector,
    coeffs: Sequence[Any],
    order: int = 4,
    xs: Sequence[Any] | None = None,
    ys: Sequence[Any] | None = None,
    grid_steps: Sequence[Any] = DEFAULT_GRID_STEPS,
    budget: int = DEFAULT_MINOR_BUDGET,
    seed: int = 0,
) -> WitnessSearchResult:
    """TN search for poly(Lambda_alpha); only homotheties (and constants) are expected to pass.

    Without explicit grids the search runs arithmetic, half-step shifted and
    geometric grids of size ``order``, then the offset and seeded random grids
    of every size 2..order that ``falsify_preserver`` uses.
    """
    if params.m < 3:
        raise PreconditionError(f"Polynomial rigidity needs m >= 3 parameters, got {params.m}")
    kernel = PolyOf(HW(params), tuple(coeffs))
    predicted = _poly_predicted_tn(kernel)
    meter = MinorBudget(budget)
    first = None
    tested = 0
    try:
        for grid_xs, grid_ys in _rigidity_grids(order, xs, ys, grid_steps, seed):
            try:
                g = sample(kernel, grid_xs, grid_ys)
            except SamplingError:
                continue
            report = check_tn(g, len(grid_xs), meter)
            tested += 1
            if not report.holds:
                LOGGER.info("rigidity: negative minor after %d grids", tested)
                return WitnessSearchResult(
                    "NegativeMinor", report, grid_xs, grid_ys, kernel, None, tested,
                    mpmath.mp.prec,
                )
            if first is None:
                first = (report, grid_xs, grid_ys)
    except BudgetExceededError as exc:
        if first is None:
            raise
        LOGGER.warning("hw_poly_rigidity stopped after %d grids: %s", tested, exc)
        report, grid_xs, grid_ys = first
        return WitnessSearchResult(
            "Inconclusive", report, grid_xs, grid_ys, kernel, None, tested, mpmath.mp.prec
        )
    if first is None:
        raise GridError("No rigidity grid could be sampled")
    report, grid_xs, grid_ys = first
    status = "TN" if predicted else "Inconclusive"
    return WitnessSearchResult(
        status, report, grid_xs, grid_ys, kernel, None, tested, mpmath.mp.prec
    )


def _rigidity_grids(
    order: int,
    xs: Sequence[Any] | None,
    ys: Sequence[Any] | None,
    grid_steps: Sequence[Any],
    seed: int,
):
    if xs is not None or ys is not None:
        yield tuple(xs if xs is not None else ys), tuple(ys if ys is not None else xs)
        return
    for step in _merged_steps(grid_steps, ("1", "2")):
        base = arithmetic_grid(order, step)
        yield base, base
        yield base, tuple(y + step / 2 for y in base)
        yield base, tuple(y - step / 2 for y in base)
        yield geometric_grid(order, 2, step), base
    rng = random.Random(seed)
    steps = _merged_steps(FALSIFY_STEPS, grid_steps)
    for n in range(2, order + 1):
        yield from _falsify_grids(n, steps, 12, rng, 4)


# ---------------------------------------------------------------------------
# Recovery
# ---------------------------------------------------------------------------


def _recovery_bits() -> int:
    return max(mpmath.mp.prec, RECOVERY_PRECISION_BITS)


def _max_deviation(produced: Sequence[Scalar], expected: Sequence[Scalar]) -> mpmath.mpf:
    return max(abs(to_float(a) - to_float(b)) for a, b in zip(produced, expected))


def _input_bits(values: Sequence[Any]) -> int:
    """Accuracy of the caller's data: exact inputs count as recovery precision."""
    if all(is_exact(as_scalar(v)) for v in values):
        return _recovery_bits()
    return mpmath.mp.prec


def _roots_from_h(h: Sequence[Scalar], m: int, input_bits: int) -> tuple[mpmath.mpf, ...]:
    e = h_to_e(SymPolyTable(tuple(h)), m)
    coeffs = [(-1) ** k * e[k] for k in range(m + 1)]
    return real_roots_monic(coeffs, input_bits=input_bits)


def recover_from_moments(mu: Sequence[Any], m: int) -> RecoveryResult:
    """Parameters alpha (sorted) from the moments mu_1..mu_m = k! h_k(alpha)."""
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    if len(mu) != m:
        raise DimensionError(f"Expected {m} moments, got {len(mu)}")
    input_bits = _input_bits(mu)
    with working_precision(_recovery_bits()):
        moments = [as_scalar(v) for v in mu]
        h = [1] + [moments[k - 1] / math.factorial(k) for k in range(1, m + 1)]
        roots = _roots_from_h(h, m, input_bits)
        recovered = ParamVector(roots).ascending()
        reproduced = [hw_moment(recovered, k) for k in range(1, m + 1)]
        residual = _max_deviation(reproduced, moments)
    LOGGER.debug("recover_from_moments m=%d residual=%s", m, mpmath.nstr(residual, 5))
    return RecoveryResult(recovered, residual)


def recover_from_maclaurin(c: Sequence[Any], m: int) -> RecoveryResult:
    """Parameters from the one-sided derivatives Lambda^{(k)}(0+), k = m-1 .. 2m-1.

    The lowest one equals a_1...a_m; the ratios c[k] / c[0] give (-1)^k h_k(a).
    """
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    if len(c) != m + 1:
        raise DimensionError(f"Expected {m + 1} coefficients, got {len(c)}")
    input_bits = _input_bits(c)
    with working_precision(_recovery_bits()):
        values = [as_scalar(v) for v in c]
        if values[0] == 0:
            raise DegenerateInputError("Lowest Maclaurin coefficient is 0; it must equal prod a_j")
        h = [1] + [(-1) ** k * values[k] / values[0] for k in range(1, m + 1)]
        rates = _roots_from_h(h, m, input_bits)
        recovered = ParamVector.from_reciprocals(rates).ascending()
        reproduced = hw_derivatives_at_zero(recovered, m)
        residual = _max_deviation(reproduced, values)
    LOGGER.debug("recover_from_maclaurin m=%d residual=%s", m, mpmath.nstr(residual, 5))
    return RecoveryResult(recovered, residual)


def _power_moments(a1: Scalar, delta: Scalar, big_k: int, count: int) -> list[Scalar]:
    """Moments 1..count of the normalized e^{-k a1 x} (1 - e^{-delta x})^K."""
    if delta == 0:
        rate = a1
        return [
            Fraction(math.factorial(big_k + j), math.factorial(big_k)) / rate**j
            if is_exact(rate)
            else mpmath.mpf(math.factorial(big_k + j)) / math.factorial(big_k) / rate**j
            for j in range(1, count + 1)
        ]
    weights = [math.comb(big_k, i) * (-1) ** i for i in range(big_k + 1)]
    rates = [a1 + i * delta for i in range(big_k + 1)]
    total = sum(w / r for w, r in zip(weights, rates))
    return [
        sum(w * math.factorial(j) / r ** (j + 1) for w, r in zip(weights, rates)) / total
        for j in range(1, count + 1)
    ]


def arithmetic_progression_power(
    params: ParamVector,
    k: int,
    order: int = 5,
    step: Any = "0.5",
) -> tuple[ParamVector, TnReport, Scalar]:
    """Parameters of Lambda_alpha^k (normalized) when the reciprocals 1/alpha_j are in AP.

    The power is proportional to e^{-k a_1 x}(1 - e^{-delta x})^{k(m-1)}; its moments
    are computed in closed form and inverted with ``recover_from_moments``. The
    power itself is then TN-checked on an order x order grid.
    """
    if k < 1:
        raise DomainError(f"Power must be a positive integer, got {k}")
    rates = sorted(params.a)
    m = len(rates)
    delta = rates[1] - rates[0] if m > 1 else 0
    for previous, current in zip(rates, rates[1:]):
        gap = current - previous
        if abs(to_float(gap - delta)) > AP_TOLERANCE * max(1, abs(to_float(current))):
            raise PreconditionError(f"Reciprocals {rates} do not form an arithmetic progression")
    if abs(to_float(delta)) <= AP_TOLERANCE * max(1, abs(to_float(rates[0]))):
        delta = 0 if is_exact(delta) else mpmath.mpf(0)
    big_k = k * (m - 1)
    count = big_k + 1
    with working_precision(_recovery_bits() + 4 * big_k):
        mu = _power_moments(k * rates[0], delta, big_k, count)
    recovery = recover_from_moments(mu, count)
    grid = arithmetic_grid(order, step)
    verification = check_tn(sample(PowerOf(HW(params), k), grid, grid), order)
    return recovery.recovered, verification, recovery.residual


# ---------------------------------------------------------------------------
# Preserver falsification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreserverFamily:
    """A candidate preserver F; kinds: power (c x^alpha), constant, indicator, affine."""

    kind: str
    params: tuple[Scalar, ...]

    def __post_init__(self):
        arity = {"power": 2, "constant": 1, "indicator": 1, "affine": 2}
        if self.kind not in arity:
            raise DomainError(f"Unknown preserver family {self.kind!r}")
        params = tuple(as_scalar(v) for v in self.params)
        if len(params) != arity[self.kind]:
            raise DimensionError(f"{self.kind} takes {arity[self.kind]} parameters")
        if self.kind == "power" and not params[1] > 0:
            raise DomainError(f"Power exponent must be positive, got {params[1]}")
        object.__setattr__(self, "params", params)

    @classmethod
    def power(cls, c: Any, alpha: Any) -> PreserverFamily:
        return cls("power", (c, alpha))

    @classmethod
    def constant(cls, c: Any) -> PreserverFamily:
        return cls("constant", (c,))

    @classmethod
    def indicator_positive(cls, c: Any) -> PreserverFamily:
        return cls("indicator", (c,))

    @classmethod
    def affine(cls, c0: Any, c1: Any) -> PreserverFamily:
        return cls("affine", (c0, c1))

    def apply(self, kernel: KernelSpec) -> KernelSpec:
        if self.kind == "power":
            c, alpha = self.params
            inner = kernel if alpha == 1 else PowerOf(kernel, alpha)
            return PolyOf(inner, (0, c))
        if self.kind == "constant":
            return PolyOf(kernel, (self.params[0],))
        if self.kind == "indicator":
            return IndicatorOf(kernel, self.params[0])
        return PolyOf(kernel, self.params)

    def predicted_preserver(self, order: int) -> bool:
        """Whether F maps TN_order Toeplitz samples to TN_order samples."""
        if self.kind == "power":
            c, alpha = self.params
            if not c > 0:
                return False
            return alpha == 1 or order <= 2 or (order == 3 and alpha >= 1)
        if self.kind in {"constant", "indicator"}:
            return self.params[0] >= 0
        c0, c1 = self.params
        if c1 == 0:
            return c0 >= 0
        if c0 == 0:
            return PreserverFamily.power(c1, 1).predicted_preserver(order)
        return order == 1 and c0 >= 0 and c1 >= 0

    def describe(self) -> str:
        values = ", ".join(str(v) for v in self.params)
        return f"{self.kind}({values})"


def _battery(grid_class: str) -> tuple[KernelSpec, ...]:
    pf = (
        Gauss(),
        OmegaQR(1, 1),
        HW(ParamVector.of(1, 2, 5)),
        MBeta(1),
        LambdaD(Fraction(1, 2)),
        Gamma(3),
    )
    if grid_class == "PF-grid":
        return pf
    if grid_class == "TN-grid":
        return pf + (Heaviside(),)
    if grid_class == "one-sided-TN-grid":
        return (
            OmegaQR(1, 1),
            HW(ParamVector.of(1, 2, 5)),
            LambdaD(Fraction(1, 2)),
            Heaviside(),
            Gamma(3),
            OmegaQR(1, 2),
        )
    raise DomainError(f"Unknown grid class {grid_class!r}")


GRID_CLASSES = ("PF-grid", "TN-grid", "one-sided-TN-grid")


@dataclass(frozen=True)
class FalsificationResult:
    """status is "Counterexample", "Survived" or "Inconclusive"."""

    status: str
    family: PreserverFamily
    grid_class: str
    order: int
    kernel: KernelSpec | None
    report: TnReport | None
    xs: tuple[Scalar, ...]
    ys: tuple[Scalar, ...]
    predicted_preserver: bool
    grids_tested: int
    note: str = ""


def _falsify_grids(n: int, steps: Sequence[Scalar], offsets: int, rng: random.Random, extra: int):
    for step in steps:
        xs = arithmetic_grid(n, step)
        for i in range(offsets):
            offset = step * (-n + Fraction(2 * n * (2 * i + 1), 2 * offsets))
            yield xs, tuple(x + offset for x in xs)
    for _ in range(extra):
        xs = tuple(Fraction(v, 8) for v in sorted(rng.sample(range(0, 24 * n), n)))
        ys = tuple(Fraction(v, 8) for v in sorted(rng.sample(range(0, 24 * n), n)))
        yield xs, ys


def falsify_preserver(
    family: PreserverFamily,
    grid_class: str = "TN-grid",
    order: int = 4,
    budget: int = DEFAULT_MINOR_BUDGET,
    seed: int = 0,
    steps: Sequence[Any] = FALSIFY_STEPS,
    offsets: int = 12,
    random_grids: int = 4,
) -> FalsificationResult:
    """Push the named kernel battery through F and TN-check the results up to ``order``."""
    if order < 1:
        raise DomainError(f"Order must be at least 1, got {order}")
    battery = _battery(grid_class)
    predicted = family.predicted_preserver(order)
    rng = random.Random(seed)
    meter = MinorBudget(budget)
    step_values = [as_scalar(s) for s in steps]
    tested = 0
    start_time = time.perf_counter()
    try:
        for n in range(1, order + 1):
            for kernel in battery:
                transformed = family.apply(kernel)
                for xs, ys in _falsify_grids(n, step_values, offsets, rng, random_grids):
                    try:
                        g = sample(transformed, xs, ys)
                    except SamplingError:
                        continue
                    report = check_tn(g, n, meter)
                    tested += 1
                    if not report.holds:
                        if predicted:
                            LOGGER.warning(
                                "%s failed on %s although it is a predicted preserver",
                                family.describe(),
                                kernel.family,
                            )
                        LOGGER.info(
                            "falsify %s: counterexample at order %d after %d grids",
                            family.describe(),
                            n,
                            tested,
                        )
                        return FalsificationResult(
                            "Counterexample", family, grid_class, order, transformed, report,
                            xs, ys, predicted, tested,
                        )
    except BudgetExceededError as exc:
        return FalsificationResult(
            "Inconclusive", family, grid_class, order, None, None, (), (), predicted, tested,
            str(exc),
        )
    duration_ms = (time.perf_counter() - start_time) * 1000.0
    log_level = logging.INFO if duration_ms > SLOW_ROW_MS else logging.DEBUG
    LOGGER.log(
        log_level, "falsify %s survived %d grids (%.1f ms)", family.describe(), tested, duration_ms
    )
    status = "Survived" if predicted else "Inconclusive"
    return FalsificationResult(
        status, family, grid_class, order, None, None, (), (), predicted, tested
    )


def moments_of(params: ParamVector, count: int) -> list[Scalar]:
    """mu_1..mu_count, the inputs ``recover_from_moments`` expects."""
    return [hw_moment(params, k) for k in range(1, count + 1)]


def maclaurin_of(params: ParamVector) -> list[Scalar]:
    """The m + 1 lowest one-sided derivatives at 0, as ``recover_from_maclaurin`` takes them."""
    return hw_derivatives_at_zero(params, params.m)
