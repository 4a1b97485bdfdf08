"""Exact and high-precision arithmetic shared by every other module.

Exact values are ``fractions.Fraction``; floating values are ``mpmath.mpf`` at the
ambient mpmath precision. Functions decorated with ``uses_working_precision``
run at 128 bits when mpmath is still at its stock 53-bit setting.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Any, Callable, Iterator, Sequence, TypeVar, Union

import mpmath

from errors import DimensionError, DomainError, InconsistentInputError

LOGGER = logging.getLogger(__name__)

DEFAULT_PRECISION_BITS = 128
MIN_PRECISION_BITS = 64
DEFAULT_ROOT_TOLERANCE = 1e-10
ROOT_CLUSTER_FACTOR = 1024
ROOT_IMAGINARY_TOLERANCE = 1e-6
FALLBACK_RELATIVE_EPSILON = 1e-12

Scalar = Union[int, Fraction, mpmath.mpf]
FuncT = TypeVar("FuncT", bound=Callable[..., Any])


@contextmanager
def working_precision(bits: int) -> Iterator[int]:
    """Temporarily set the mpmath binary precision."""
    bits = int(bits)
    if bits < MIN_PRECISION_BITS:
        raise DomainError(f"Precision must be at least {MIN_PRECISION_BITS} bits, got {bits}")
    with mpmath.workprec(bits):
        yield bits


def uses_working_precision(func: FuncT) -> FuncT:
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        if mpmath.mp.prec >= MIN_PRECISION_BITS:
            return func(*args, **kwargs)
        with mpmath.workprec(DEFAULT_PRECISION_BITS):
            return func(*args, **kwargs)

    return wrapper  # type: ignore[return-value]


def unit_roundoff() -> mpmath.mpf:
    return mpmath.ldexp(mpmath.mpf(1), 1 - mpmath.mp.prec)


def is_exact(value: Any) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def to_exact(value: Any) -> Fraction:
    """Convert int, str, Decimal, float or a finite mpf to an exact rational."""
    if isinstance(value, bool):
        raise DomainError(f"Booleans are not scalars: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, (str, Decimal, float)):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"Cannot read {value!r} as an exact rational") from exc
    if isinstance(value, mpmath.mpf):
        if not mpmath.isfinite(value):
            raise DomainError(f"Cannot represent {value} exactly")
        negative, mantissa, exponent, _ = value._mpf_
        magnitude = Fraction(int(mantissa)) * Fraction(2) ** int(exponent)
        return -magnitude if negative else magnitude
    raise DomainError(f"Unsupported scalar type {type(value).__name__}")


def to_float(value: Any) -> mpmath.mpf:
    """Convert any supported scalar to an mpf at the ambient precision."""
    if isinstance(value, bool):
        raise DomainError(f"Booleans are not scalars: {value!r}")
    if isinstance(value, mpmath.mpf):
        return value
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, str) and "/" in value:
        return to_float(to_exact(value))
    if isinstance(value, (int, float, str)):
        try:
            return mpmath.mpf(value)
        except ValueError as exc:
            raise DomainError(f"Cannot read {value!r} as a number") from exc
    if isinstance(value, Decimal):
        return mpmath.mpf(str(value))
    raise DomainError(f"Unsupported scalar type {type(value).__name__}")


class SignClass(enum.Enum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1

    def __neg__(self) -> SignClass:
        return SignClass(-self.value)

    @property
    def label(self) -> str:
        return self.name.capitalize()


def sign_with_tolerance(value: Scalar, error_bound: Scalar) -> SignClass:
    v = to_float(value)
    bound = to_float(error_bound)
    if mpmath.isnan(bound) or bound < 0:
        raise DomainError(f"Error bound must be non-negative, got {bound}")
    if v < -bound:
        return SignClass.NEGATIVE
    if v > bound:
        return SignClass.POSITIVE
    return SignClass.ZERO


def exact_sign(value: Scalar) -> SignClass:
    if value < 0:
        return SignClass.NEGATIVE
    if value > 0:
        return SignClass.POSITIVE
    return SignClass.ZERO


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major matrix whose entries are all exact rationals or all mpf."""

    rows: int
    cols: int
    entries: tuple[Scalar, ...]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DimensionError(f"Matrix must be non-empty, got {self.rows}x{self.cols}")
        if len(self.entries) != self.rows * self.cols:
            raise DimensionError(
                f"Expected {self.rows * self.cols} entries for a {self.rows}x{self.cols} matrix, "
                f"got {len(self.entries)}"
            )
        if all(is_exact(v) for v in self.entries):
            normalized = tuple(to_exact(v) for v in self.entries)
        else:
            normalized = tuple(to_float(v) for v in self.entries)
        object.__setattr__(self, "entries", normalized)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]]) -> DenseMatrix:
        rows = [list(row) for row in rows]
        if not rows or any(len(row) != len(rows[0]) for row in rows):
            raise DimensionError("Rows must be non-empty and of equal length")
        return cls(len(rows), len(rows[0]), tuple(v for row in rows for v in row))

    @classmethod
    def identity(cls, n: int) -> DenseMatrix:
        return cls(n, n, tuple(int(i == j) for i in range(n) for j in range(n)))

    @property
    def is_exact(self) -> bool:
        return isinstance(self.entries[0], Fraction)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def entry(self, i: int, j: int) -> Scalar:
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple[Scalar, ...]:
        return self.entries[i * self.cols : (i + 1) * self.cols]

    def to_rows(self) -> list[list[Scalar]]:
        return [list(self.row(i)) for i in range(self.rows)]

    def submatrix(self, row_indices: Sequence[int], col_indices: Sequence[int]) -> DenseMatrix:
        return DenseMatrix(
            len(row_indices),
            len(col_indices),
            tuple(self.entry(i, j) for i in row_indices for j in col_indices),
        )


def _require_square(m: DenseMatrix):
    if not m.is_square:
        raise DimensionError(f"Determinant needs a square matrix, got {m.rows}x{m.cols}")


def _bareiss(a: list[list[int]]) -> int:
    n = len(a)
    sign = 1
    previous = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = k + 1
            while swap < n and a[swap][k] == 0:
                swap += 1
            if swap == n:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // previous
        previous = a[k][k]
    return sign * a[n - 1][n - 1]


def det_exact(m: DenseMatrix) -> Fraction:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    _require_square(m)
    if not m.is_exact:
        raise DomainError("det_exact needs exact entries; use det_float")
    scale = 1
    integer_rows = []
    for i in range(m.rows):
        row = m.row(i)
        common = math.lcm(*(v.denominator for v in row))
        integer_rows.append([int(v * common) for v in row])
        scale *= common
    return Fraction(_bareiss(integer_rows), scale)


@uses_working_precision
def det_float(
    m: DenseMatrix,
    entry_errors: Sequence[Scalar] | None = None,
) -> tuple[mpmath.mpf, mpmath.mpf]:
    """Determinant by partially pivoted elimination plus a forward error bound.

    ``entry_errors`` are absolute uncertainties of the entries (row-major). The bound
    covers the backward error of the factorization, the entry uncertainties weighted
    by a Hadamard bound on the cofactors, and the rounding of the pivot product.
    """
    _require_square(m)
    n = m.rows
    u = unit_roundoff()
    a = [[to_float(v) for v in m.row(i)] for i in range(n)]

    magnitude = mpmath.fsum(abs(v) for row in a for v in row)
    perturbation = 2 * u * magnitude
    if entry_errors is not None:
        if len(entry_errors) != n * n:
            raise DimensionError(f"Expected {n * n} entry errors, got {len(entry_errors)}")
        perturbation += mpmath.fsum(to_float(e) for e in entry_errors)

    row_norms = sorted(
        (mpmath.sqrt(mpmath.fsum(v * v for v in row)) for row in a),
        reverse=True,
    )
    hadamard = mpmath.fprod(row_norms[: n - 1])

    sign = 1
    lower = [[mpmath.mpf(0)] * n for _ in range(n)]
    for k in range(n):
        pivot_row = k
        for i in range(k + 1, n):
            if abs(a[i][k]) > abs(a[pivot_row][k]):
                pivot_row = i
        if pivot_row != k:
            a[k], a[pivot_row] = a[pivot_row], a[k]
            lower[k], lower[pivot_row] = lower[pivot_row], lower[k]
            sign = -sign
        lower[k][k] = mpmath.mpf(1)
        pivot = a[k][k]
        if pivot == 0:
            continue
        for i in range(k + 1, n):
            factor = a[i][k] / pivot
            lower[i][k] = factor
            a[i][k] = mpmath.mpf(0)
            for j in range(k + 1, n):
                a[i][j] -= factor * a[k][j]

    value = sign * mpmath.fprod(a[k][k] for k in range(n))
    lu_magnitude = mpmath.fsum(
        mpmath.fsum(abs(lower[i][k]) for i in range(k, n))
        * mpmath.fsum(abs(a[k][j]) for j in range(k, n))
        for k in range(n)
    )
    gamma = n * u / (1 - n * u)
    bound = 2 * (hadamard * (gamma * lu_magnitude + perturbation) + n * u * abs(value))
    return value, bound


def fallback_error_bound(m: DenseMatrix) -> mpmath.mpf:
    """Relative epsilon bound used when no elimination bound is available."""
    largest = max(abs(to_float(v)) for v in m.entries)
    return FALLBACK_RELATIVE_EPSILON * largest**m.rows


def vandermonde(a: Sequence[Scalar]) -> Scalar:
    """Return prod_{i<j} (a_j - a_i); empty and single vectors give 1."""
    values = list(a)
    result: Scalar = 1
    for j in range(len(values)):
        for i in range(j):
            result *= values[j] - values[i]
    return result


def monic_from_roots(roots: Sequence[Scalar]) -> list[Scalar]:
    """Coefficients of prod (z - r_i), highest degree first."""
    coeffs: list[Scalar] = [1]
    for r in roots:
        shifted = coeffs + [0]
        for i in range(1, len(shifted)):
            shifted[i] -= r * coeffs[i - 1]
        coeffs = shifted
    return coeffs


def _derivative(coeffs: list[mpmath.mpf]) -> list[mpmath.mpf]:
    degree = len(coeffs) - 1
    return [c * (degree - k) for k, c in enumerate(coeffs[:-1])] or [mpmath.mpf(0)]


def cluster_radius(multiplicity: int, input_bits: int, scale: Any) -> mpmath.mpf:
    """Spread of a root of this multiplicity when coefficients carry input_bits of accuracy."""
    if multiplicity == 1:
        return mpmath.mpf(0)
    spread = mpmath.power(2, -mpmath.mpf(input_bits) / multiplicity)
    return ROOT_CLUSTER_FACTOR * spread * max(1, abs(scale))


def _group_roots(candidates: Sequence[Any], input_bits: int) -> list[list[mpmath.mpc]]:
    """Split eigenvalues into clusters, each the largest group that fits its radius."""
    remaining = sorted((mpmath.mpc(z) for z in candidates), key=lambda z: (z.real, z.imag))
    groups = []
    while remaining:
        seed = remaining[0]
        nearest = sorted(range(len(remaining)), key=lambda i: abs(remaining[i] - seed))
        for size in range(len(remaining), 0, -1):
            members = [remaining[i] for i in nearest[:size]]
            centre = mpmath.fsum(members) / size
            radius = cluster_radius(size, input_bits, centre)
            if size == 1 or max(abs(z - centre) for z in members) <= radius:
                break
        groups.append(members)
        taken = set(nearest[:size])
        remaining = [z for i, z in enumerate(remaining) if i not in taken]
    return groups


def _refine_cluster(
    coeffs: list[mpmath.mpf], multiplicity: int, start: mpmath.mpf, tol: float
) -> mpmath.mpf:
    """Newton on the (multiplicity - 1)th derivative, whose root near the cluster is simple."""
    poly = coeffs
    for _ in range(multiplicity - 1):
        poly = _derivative(poly)
    slope = _derivative(poly)
    x = start
    step = mpmath.mpf(0)
    u = unit_roundoff()
    for _ in range(100):
        fx = mpmath.polyval(poly, x)
        dfx = mpmath.polyval(slope, x)
        if dfx == 0:
            break
        step = fx / dfx
        x -= step
        if abs(step) <= 8 * u * max(1, abs(x)):
            break
    if not mpmath.isfinite(x) or abs(mpmath.polyval(poly, x)) > abs(mpmath.polyval(poly, start)):
        return start
    if abs(step) > tol * max(1, abs(x)):
        LOGGER.warning(
            "Root near %s did not settle to %s (last step %s)",
            mpmath.nstr(x, 12),
            tol,
            mpmath.nstr(step, 3),
        )
    return x


@uses_working_precision
def real_roots_monic(
    coeffs: Sequence[Scalar],
    tol: float = DEFAULT_ROOT_TOLERANCE,
    input_bits: int | None = None,
) -> tuple[mpmath.mpf, ...]:
    """Positive real roots of a monic polynomial (coefficients highest degree first).

    Roots are companion-matrix eigenvalues. A k-fold root of coefficients accurate to
    ``input_bits`` (default: the working precision) splits into a ring of radius about
    2^(-input_bits / k); eigenvalues inside such a ring form one cluster, polished by
    Newton on the (k - 1)th derivative.
    """
    values = [to_float(c) for c in coeffs]
    if not values:
        raise DimensionError("Polynomial has no coefficients")
    if values[0] != 1:
        raise DomainError(f"Polynomial must be monic, leading coefficient is {values[0]}")
    degree = len(values) - 1
    if degree == 0:
        return ()
    if degree == 1:
        candidates = [-values[1]]
    else:
        companion = mpmath.matrix(degree, degree)
        for j in range(degree):
            companion[0, j] = -values[j + 1]
        for i in range(1, degree):
            companion[i, i - 1] = 1
        candidates = mpmath.eig(companion, left=False, right=False)

    groups = _group_roots(candidates, input_bits or mpmath.mp.prec)
    refined: list[mpmath.mpf] = []
    for group in groups:
        centre = mpmath.fsum(group) / len(group)
        real, imag = mpmath.re(centre), mpmath.im(centre)
        if abs(imag) > ROOT_IMAGINARY_TOLERANCE * max(1, abs(centre)):
            raise InconsistentInputError(
                f"Polynomial has a complex root {mpmath.nstr(centre, 12)}"
            )
        if real <= 0:
            raise InconsistentInputError(
                f"Polynomial has a non-positive root {mpmath.nstr(real, 12)}"
            )
        root = _refine_cluster(values, len(group), real, tol)
        refined.extend([root] * len(group))
    refined.sort()
    LOGGER.debug("real_roots_monic degree=%d clusters=%d", degree, len(groups))
    return tuple(refined)
