"""Sample Toeplitz kernels on finite grids and test total non-negativity/positivity.

Minors are enumerated by increasing size, then lexicographically in
(row indices, column indices). Exact matrices use ``det_exact``; floating ones use
``det_float`` and are signed against its error bound, so a minor that cannot be
told apart from zero is reported as ``Zero`` rather than guessed.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Iterator, Sequence, Union

import mpmath

from errors import BudgetExceededError, DomainError, GridError, ModeError, SamplingError
from numerics_core import (
    DenseMatrix,
    Scalar,
    SignClass,
    det_exact,
    det_float,
    exact_sign,
    is_exact,
    sign_with_tolerance,
    to_float,
    uses_working_precision,
)
from pf_densities import KernelSpec
from symfunc import as_scalar

LOGGER = logging.getLogger(__name__)

DEFAULT_MINOR_BUDGET = 10_000_000
SLOW_CHECK_MS = 250.0


@dataclass(frozen=True)
class GridSample:
    """matrix[i][j] = spec(xs[i] - ys[j]) together with per-entry error bounds."""

    xs: tuple[Scalar, ...]
    ys: tuple[Scalar, ...]
    matrix: DenseMatrix
    spec: KernelSpec | None = None
    entry_errors: tuple[Scalar, ...] = ()

    def __post_init__(self):
        if self.matrix.rows != len(self.xs) or self.matrix.cols != len(self.ys):
            raise GridError(
                f"Matrix is {self.matrix.rows}x{self.matrix.cols} "
                f"but grids have {len(self.xs)} and {len(self.ys)} points"
            )

    @classmethod
    def from_matrix(cls, matrix: DenseMatrix | Sequence[Sequence[Any]]) -> GridSample:
        if not isinstance(matrix, DenseMatrix):
            matrix = DenseMatrix.from_rows(matrix)
        return cls(tuple(range(matrix.rows)), tuple(range(matrix.cols)), matrix)

    def minor_errors(self, rows: Sequence[int], cols: Sequence[int]) -> list[Scalar] | None:
        if not self.entry_errors:
            return None
        width = self.matrix.cols
        return [self.entry_errors[i * width + j] for i in rows for j in cols]


@dataclass(frozen=True)
class MinorCertificate:
    row_indices: tuple[int, ...]
    col_indices: tuple[int, ...]
    det_value: Scalar
    sign: SignClass
    error_bound: Scalar = 0
    principal: bool = False

    @property
    def order(self) -> int:
        return len(self.row_indices)


class Verdict(enum.Enum):
    TN = "TN_p"
    TP = "TP_p"
    NOT_TN = "NotTN_p"
    NOT_TP = "NotTP_p"


@dataclass(frozen=True)
class TnReport:
    """Outcome of a TN or TP check.

    ``witness`` is the violating minor for a failed check and the smallest minor
    seen otherwise. ``failure`` is ``"negative"`` or ``"zero"`` for failures.
    """

    order_tested: int
    verdict: Verdict
    witness: MinorCertificate | None
    minors_evaluated: int
    failure: str | None = None

    @property
    def holds(self) -> bool:
        return self.verdict in (Verdict.TN, Verdict.TP)


@dataclass
class MinorBudget:
    """Running cap on minor evaluations shared by the checks of one search."""

    limit: int = DEFAULT_MINOR_BUDGET
    spent: int = field(default=0)

    def __post_init__(self):
        if self.limit < 1:
            raise DomainError(f"Minor budget must be positive, got {self.limit}")

    @property
    def remaining(self) -> int:
        return self.limit - self.spent

    def reserve(self, count: int):
        if self.spent + count > self.limit:
            raise BudgetExceededError(self.spent + count, self.limit)
        self.spent += count


BudgetLike = Union[MinorBudget, int, None]


def _as_budget(budget: BudgetLike) -> MinorBudget:
    if isinstance(budget, MinorBudget):
        return budget
    return MinorBudget(DEFAULT_MINOR_BUDGET if budget is None else int(budget))


def _as_sample(g: GridSample | DenseMatrix) -> GridSample:
    if isinstance(g, GridSample):
        return g
    return GridSample.from_matrix(g)


def require_increasing(values: Sequence[Scalar], name: str):
    if not values:
        raise GridError(f"{name} must not be empty")
    for previous, current in zip(values, values[1:]):
        if not current > previous:
            raise GridError(f"{name} must be strictly increasing, got {previous} then {current}")


def _resolve_order(g: GridSample, p: int | None) -> int:
    size = min(g.matrix.rows, g.matrix.cols)
    if p is None:
        return size
    if p < 1:
        raise DomainError(f"Order must be at least 1, got {p}")
    return min(p, size)


def count_minors(rows: int, cols: int, order: int, principal_only: bool = False) -> int:
    order = min(order, rows, cols)
    if principal_only:
        return sum(math.comb(rows, r) for r in range(1, order + 1))
    return sum(math.comb(rows, r) * math.comb(cols, r) for r in range(1, order + 1))


@uses_working_precision
def sample(spec: KernelSpec, xs: Sequence[Any], ys: Sequence[Any]) -> GridSample:
    xs = tuple(as_scalar(v) for v in xs)
    ys = tuple(as_scalar(v) for v in ys)
    if not all(is_exact(v) for v in xs + ys):
        # Fraction and mpf do not mix arithmetically; promote the whole grid.
        xs = tuple(to_float(v) for v in xs)
        ys = tuple(to_float(v) for v in ys)
    require_increasing(xs, "xs")
    require_increasing(ys, "ys")
    entries = []
    errors = []
    for x in xs:
        for y in ys:
            difference = x - y
            result = spec.evaluate(difference)
            if result.unbounded:
                raise SamplingError(
                    f"{spec.family} is unbounded at x - y = {mpmath.nstr(to_float(difference), 15)}"
                    f" (x={x}, y={y})"
                )
            entries.append(result.value)
            errors.append(result.abs_error_bound)
    matrix = DenseMatrix(len(xs), len(ys), tuple(entries))
    return GridSample(xs, ys, matrix, spec, tuple(errors))


def evaluate_minor(g: GridSample, rows: Sequence[int], cols: Sequence[int]) -> MinorCertificate:
    sub = g.matrix.submatrix(rows, cols)
    if sub.is_exact:
        value = det_exact(sub)
        sign, bound = exact_sign(value), 0
    else:
        value, bound = det_float(sub, entry_errors=g.minor_errors(rows, cols))
        sign = sign_with_tolerance(value, bound)
    rows, cols = tuple(rows), tuple(cols)
    return MinorCertificate(rows, cols, value, sign, bound, rows == cols)


def _all_index_pairs(rows: int, cols: int, order: int) -> Iterator[tuple[tuple, tuple]]:
    for r in range(1, order + 1):
        for row_indices in combinations(range(rows), r):
            for col_indices in combinations(range(cols), r):
                yield row_indices, col_indices


def _contiguous_index_pairs(rows: int, cols: int, order: int) -> Iterator[tuple[tuple, tuple]]:
    for r in range(1, order + 1):
        for i in range(rows - r + 1):
            for j in range(cols - r + 1):
                yield tuple(range(i, i + r)), tuple(range(j, j + r))


def _log_check(name: str, g: GridSample, order: int, evaluated: int, start: float):
    duration_ms = (time.perf_counter() - start) * 1000.0
    log_level = logging.INFO if duration_ms > SLOW_CHECK_MS else logging.DEBUG
    LOGGER.log(
        log_level,
        "%s %dx%d order=%d minors=%d duration_ms=%.1f",
        name,
        g.matrix.rows,
        g.matrix.cols,
        order,
        evaluated,
        duration_ms,
    )


@uses_working_precision
def check_tn(
    g: GridSample | DenseMatrix,
    p: int | None = None,
    budget: BudgetLike = None,
) -> TnReport:
    """TN_p test: every minor of order <= p is non-negative; stops at the first negative one."""
    g = _as_sample(g)
    order = _resolve_order(g, p)
    _as_budget(budget).reserve(count_minors(g.matrix.rows, g.matrix.cols, order))
    start = time.perf_counter()
    evaluated = 0
    smallest = None
    for rows, cols in _all_index_pairs(g.matrix.rows, g.matrix.cols, order):
        certificate = evaluate_minor(g, rows, cols)
        evaluated += 1
        if certificate.sign is SignClass.NEGATIVE:
            _log_check("check_tn", g, order, evaluated, start)
            return TnReport(order, Verdict.NOT_TN, certificate, evaluated, "negative")
        if smallest is None or certificate.det_value < smallest.det_value:
            smallest = certificate
    _log_check("check_tn", g, order, evaluated, start)
    return TnReport(order, Verdict.TN, smallest, evaluated)


@uses_working_precision
def check_tp(
    g: GridSample | DenseMatrix,
    p: int | None = None,
    use_fekete: bool = False,
    budget: BudgetLike = None,
) -> TnReport:
    """TP_p test. With ``use_fekete`` only contiguous minors are examined (full order only)."""
    g = _as_sample(g)
    order = _resolve_order(g, p)
    rows, cols = g.matrix.rows, g.matrix.cols
    if use_fekete:
        if order < min(rows, cols):
            raise ModeError(
                f"Fekete's criterion only decides full TP; order {order} < {min(rows, cols)}"
            )
        pairs = _contiguous_index_pairs(rows, cols, order)
        count = sum((rows - r + 1) * (cols - r + 1) for r in range(1, order + 1))
    else:
        pairs = _all_index_pairs(rows, cols, order)
        count = count_minors(rows, cols, order)
    _as_budget(budget).reserve(count)
    start = time.perf_counter()
    evaluated = 0
    smallest = None
    for row_indices, col_indices in pairs:
        certificate = evaluate_minor(g, row_indices, col_indices)
        evaluated += 1
        if certificate.sign is not SignClass.POSITIVE:
            failure = "negative" if certificate.sign is SignClass.NEGATIVE else "zero"
            _log_check("check_tp", g, order, evaluated, start)
            return TnReport(order, Verdict.NOT_TP, certificate, evaluated, failure)
        if smallest is None or certificate.det_value < smallest.det_value:
            smallest = certificate
    _log_check("check_tp", g, order, evaluated, start)
    return TnReport(order, Verdict.TP, smallest, evaluated)


@uses_working_precision
def principal_minor_scan(
    g: GridSample | DenseMatrix,
    p: int | None = None,
    budget: BudgetLike = None,
) -> MinorCertificate | None:
    """Most negative principal minor of order <= p, or None when none is negative."""
    g = _as_sample(g)
    if g.matrix.rows != g.matrix.cols:
        raise GridError(
            f"Principal minors need grids of equal length, got {g.matrix.rows} and {g.matrix.cols}"
        )
    order = _resolve_order(g, p)
    _as_budget(budget).reserve(count_minors(g.matrix.rows, g.matrix.cols, order, True))
    worst = None
    for r in range(1, order + 1):
        for indices in combinations(range(g.matrix.rows), r):
            certificate = evaluate_minor(g, indices, indices)
            if certificate.sign is not SignClass.NEGATIVE:
                continue
            if worst is None or certificate.det_value < worst.det_value:
                worst = certificate
    return worst


def scaled_value(g: GridSample, certificate: MinorCertificate) -> mpmath.mpf:
    """Minor divided by the product of its rows' largest entries; zero rows give 0."""
    scale = mpmath.mpf(1)
    for i in certificate.row_indices:
        largest = max(abs(to_float(g.matrix.entry(i, j))) for j in certificate.col_indices)
        if largest == 0:
            return mpmath.mpf(0)
        scale *= largest
    return to_float(certificate.det_value) / scale


@uses_working_precision
def minimum_minor(
    g: GridSample | DenseMatrix,
    p: int | None = None,
    principal_only: bool = False,
    budget: BudgetLike = None,
) -> tuple[MinorCertificate, mpmath.mpf]:
    """Minor with the smallest scaled value, and that value.

    Any certified-negative minor outranks the rest, so a returned certificate with
    a positive or zero sign means none of the examined minors is negative.
    """
    g = _as_sample(g)
    if principal_only and g.matrix.rows != g.matrix.cols:
        raise GridError("Principal minors need grids of equal length")
    order = _resolve_order(g, p)
    _as_budget(budget).reserve(
        count_minors(g.matrix.rows, g.matrix.cols, order, principal_only)
    )
    if principal_only:
        pairs = (
            (indices, indices)
            for r in range(1, order + 1)
            for indices in combinations(range(g.matrix.rows), r)
        )
    else:
        pairs = _all_index_pairs(g.matrix.rows, g.matrix.cols, order)
    best = None
    best_key = None
    for rows, cols in pairs:
        certificate = evaluate_minor(g, rows, cols)
        key = (certificate.sign is not SignClass.NEGATIVE, scaled_value(g, certificate))
        if best_key is None or key < best_key:
            best, best_key = certificate, key
    return best, best_key[1]
