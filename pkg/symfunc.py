"""Complete homogeneous and elementary symmetric polynomials.

Also holds ``ParamVector``, the coefficient vector of a hypoexponential density,
because the moment/parameter dictionary is phrased in terms of h_p and e_p.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import mpmath

from errors import DimensionError, DomainError
from numerics_core import (
    DenseMatrix,
    Scalar,
    det_exact,
    det_float,
    is_exact,
    to_exact,
    to_float,
    uses_working_precision,
)

LOGGER = logging.getLogger(__name__)

FLOAT_DISTINCT_TOLERANCE = 1e-12


def as_scalar(value: Any) -> Scalar:
    """Keep ints, rationals and decimal strings exact; everything else becomes mpf."""
    if isinstance(value, (int, Fraction, str)) and not isinstance(value, bool):
        try:
            return to_exact(value)
        except DomainError:
            return to_float(value)
    return to_float(value)


@dataclass(frozen=True)
class ParamVector:
    """Parameters alpha_1..alpha_m > 0 of the density of sum alpha_j X_j."""

    alpha: tuple[Scalar, ...]

    def __post_init__(self):
        values = tuple(as_scalar(v) for v in self.alpha)
        if not values:
            raise DimensionError("A parameter vector needs at least one entry")
        for value in values:
            if not value > 0:
                raise DomainError(f"Parameters must be positive, got {value}")
        if not all(is_exact(v) for v in values):
            values = tuple(to_float(v) for v in values)
        object.__setattr__(self, "alpha", values)

    @classmethod
    def of(cls, *values: Any) -> ParamVector:
        return cls(tuple(values))

    @classmethod
    def from_reciprocals(cls, a: Iterable[Any]) -> ParamVector:
        return cls(tuple(1 / as_scalar(v) for v in a))

    @property
    def m(self) -> int:
        return len(self.alpha)

    @property
    def is_exact(self) -> bool:
        return is_exact(self.alpha[0])

    @property
    def a(self) -> tuple[Scalar, ...]:
        """Reciprocals a_j = 1/alpha_j (the exponential rates)."""
        return tuple(1 / v for v in self.alpha)

    @property
    def distinct(self) -> bool:
        if self.is_exact:
            return len(set(self.alpha)) == self.m
        for i in range(self.m):
            for j in range(i):
                scale = max(abs(self.alpha[i]), abs(self.alpha[j]))
                if abs(self.alpha[i] - self.alpha[j]) <= FLOAT_DISTINCT_TOLERANCE * scale:
                    return False
        return True

    def ascending(self) -> ParamVector:
        return ParamVector(tuple(sorted(self.alpha)))


@dataclass(frozen=True)
class SymPolyTable:
    """h_0..h_N (kind "h") or e_0..e_m (kind "e") at a fixed argument vector."""

    values: tuple[Scalar, ...]
    kind: str = "h"

    def __post_init__(self):
        if self.kind not in {"h", "e"}:
            raise DomainError(f"Unknown table kind {self.kind!r}")
        if not self.values or self.values[0] != 1:
            raise DomainError("A symmetric polynomial table must start with 1")

    def __getitem__(self, k: int) -> Scalar:
        if k < 0:
            return 0
        if k >= len(self.values):
            if self.kind == "e":
                return 0
            raise DimensionError(f"Table holds h_0..h_{len(self.values) - 1}, asked for h_{k}")
        return self.values[k]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def degree(self) -> int:
        return len(self.values) - 1


def h_table(args: Sequence[Any], n: int) -> list[Scalar]:
    """h_0..h_n via h_p(x_1..x_k) = h_p(x_1..x_{k-1}) + x_k h_{p-1}(x_1..x_k)."""
    if n < 0:
        raise DomainError(f"Degree must be non-negative, got {n}")
    values = [as_scalar(x) for x in args]
    table: list[Scalar] = [1] + [0] * n
    for x in values:
        for p in range(1, n + 1):
            table[p] = table[p] + x * table[p - 1]
    return table


def e_table(args: Sequence[Any], n: int) -> list[Scalar]:
    if n < 0:
        raise DomainError(f"Degree must be non-negative, got {n}")
    values = [as_scalar(x) for x in args]
    table: list[Scalar] = [1] + [0] * n
    for x in values:
        for p in range(n, 0, -1):
            table[p] = table[p] + x * table[p - 1]
    return table


def h_eval(args: Sequence[Any], p: int) -> Scalar:
    return h_table(args, p)[p]


def e_eval(args: Sequence[Any], p: int) -> Scalar:
    return e_table(args, p)[p]


def _jacobi_trudi_matrix(h: SymPolyTable, k: int) -> DenseMatrix:
    return DenseMatrix.from_rows(
        [[h[1 - i + j] for j in range(1, k + 1)] for i in range(1, k + 1)]
    )


@uses_working_precision
def h_to_e(h: SymPolyTable, m: int) -> SymPolyTable:
    """e_k = det(h_{1-i+j})_{i,j=1..k} for k = 0..m."""
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    if h.kind != "h":
        raise DomainError("h_to_e needs an h-table")
    if len(h) < m + 1:
        raise DimensionError(f"Need h_0..h_{m}, table has {len(h)} entries")
    exact = all(is_exact(v) for v in h.values[: m + 1])
    values: list[Scalar] = [1]
    for k in range(1, m + 1):
        matrix = _jacobi_trudi_matrix(h, k)
        if exact:
            values.append(det_exact(matrix))
        else:
            values.append(det_float(matrix)[0])
    return SymPolyTable(tuple(values), kind="e")


@uses_working_precision
def h_generating_partial_sum(args: Sequence[Any], z: Any, n: int) -> Scalar:
    """sum_{p=0}^{n} h_p(args) z^p, inside the disc |z| < 1 / max|arg|."""
    if n < 1:
        raise DomainError(f"Number of terms must be positive, got {n}")
    values = [as_scalar(x) for x in args]
    z = as_scalar(z)
    if values:
        ratio = max(abs(to_float(x)) for x in values) * abs(to_float(z))
        if ratio >= 1:
            raise DomainError(
                f"|z| = {mpmath.nstr(abs(to_float(z)), 10)} is outside the convergence disc"
            )
    table = h_table(values, n)
    total: Scalar = 0
    power: Scalar = 1
    for p in range(n + 1):
        total += table[p] * power
        power *= z
    return total


def geometric_tail_bound(args: Sequence[Any], z: Any, n: int) -> mpmath.mpf:
    """Upper bound for the omitted tail sum_{p>n} h_p(args) z^p."""
    values = [abs(to_float(as_scalar(x))) for x in args]
    if not values:
        return mpmath.mpf(0)
    m = len(values)
    ratio = max(values) * abs(to_float(as_scalar(z)))
    if ratio >= 1:
        return mpmath.inf
    # h_p <= C(p+m-1, m-1) max^p, and the term ratio decreases in p
    first = mpmath.binomial(n + m, m - 1) * ratio ** (n + 1)
    growth = ratio * (n + m + 1) / (n + 2)
    if growth >= 1:
        return mpmath.inf
    return first / (1 - growth)
