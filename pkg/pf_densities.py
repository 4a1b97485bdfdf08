"""Closed-form evaluators for the one-dimensional kernels used across PolyaLab.

Hirschman-Widder densities get three independent evaluators (additive, Maclaurin
series, determinantal) so they can check each other. The remaining families are
the named Polya frequency functions plus the compositions ``PowerOf``, ``PolyOf``
and ``IndicatorOf`` that preserver experiments push kernels through.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, ClassVar, Mapping, Sequence

import mpmath

from errors import DegenerateInputError, DimensionError, DomainError, RequiresDistinctError
from numerics_core import (
    DenseMatrix,
    Scalar,
    det_float,
    is_exact,
    to_exact,
    to_float,
    unit_roundoff,
    uses_working_precision,
    vandermonde,
)
from symfunc import (
    ParamVector,
    as_scalar,
    geometric_tail_bound,
    h_eval,
    h_generating_partial_sum,
    h_table,
)

LOGGER = logging.getLogger(__name__)

SERIES_FALLBACK_GAP = 1e-4
MAX_SERIES_TERMS = 200_000
GUARD_BITS = 32


@dataclass(frozen=True)
class EvalResult:
    value: Scalar
    abs_error_bound: Scalar
    unbounded: bool = False

    def __post_init__(self):
        bound = self.abs_error_bound
        if not self.unbounded and (not bound >= 0 or bound == mpmath.inf):
            raise DomainError(f"Error bound must be finite and non-negative, got {bound}")

    @classmethod
    def exact(cls, value: Scalar) -> EvalResult:
        return cls(value, 0)

    @classmethod
    def infinite(cls) -> EvalResult:
        return cls(mpmath.inf, mpmath.inf, unbounded=True)


def encode_scalar(value: Scalar) -> Any:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return value.numerator
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return value
    return mpmath.nstr(value, 30)


def _is_integer(value: Scalar) -> bool:
    if is_exact(value):
        return Fraction(value).denominator == 1
    return mpmath.isint(value)


# ---------------------------------------------------------------------------
# Kernel families
# ---------------------------------------------------------------------------


class KernelSpec:
    """A real function of one variable, sampled as the Toeplitz kernel K(x, y) = f(x - y)."""

    family: ClassVar[str] = ""

    def evaluate(self, x: Any) -> EvalResult:
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    @property
    def discontinuity_points(self) -> frozenset:
        return frozenset()

    @property
    def smoothness_class(self) -> float:
        """Largest k with the function in C^k; -1 when discontinuous, ``math.inf`` if smooth."""
        return math.inf

    def params_json(self) -> dict[str, Any]:
        return {}

    def to_json(self) -> dict[str, Any]:
        return {"family": self.family, "params": self.params_json()}

    def describe(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class HW(KernelSpec):
    """Density of sum alpha_j X_j for independent standard exponentials X_j."""

    params: ParamVector
    family: ClassVar[str] = "HW"

    def evaluate(self, x: Any) -> EvalResult:
        return _hw_evaluate(self.params, x)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def discontinuity_points(self) -> frozenset:
        return frozenset({0}) if self.params.m == 1 else frozenset()

    @property
    def smoothness_class(self) -> float:
        return self.params.m - 2

    def params_json(self) -> dict[str, Any]:
        return {"alpha": [encode_scalar(v) for v in self.params.alpha]}


@dataclass(frozen=True)
class OmegaQR(KernelSpec):
    """Density of q X_1 + r X_2; OmegaQR(1, 1) is x e^{-x} on x >= 0."""

    q: Scalar
    r: Scalar
    family: ClassVar[str] = "OmegaQR"

    def __post_init__(self):
        q, r = as_scalar(self.q), as_scalar(self.r)
        if not (q > 0 and r > 0):
            raise DomainError(f"OmegaQR needs q, r > 0, got q={q}, r={r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    def as_hw(self) -> HW:
        return HW(ParamVector.of(self.q, self.r))

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        x = as_scalar(x)
        if x <= 0:
            return EvalResult.exact(0)
        u = unit_roundoff()
        q, r = to_float(self.q), to_float(self.r)
        xf = to_float(x)
        if q == r:
            value = xf * mpmath.exp(-xf / q) / (q * q)
            return EvalResult(value, 8 * u * abs(value))
        if abs(q - r) < SERIES_FALLBACK_GAP * max(q, r):
            return _hw_evaluate(self.as_hw().params, x)
        first, second = mpmath.exp(-xf / q), mpmath.exp(-xf / r)
        value = (first - second) / (q - r)
        bound = 6 * u * (first + second) / abs(q - r) + 2 * u * abs(value)
        return EvalResult(value, bound)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def smoothness_class(self) -> float:
        return 0

    def params_json(self) -> dict[str, Any]:
        return {"q": encode_scalar(self.q), "r": encode_scalar(self.r)}


@dataclass(frozen=True)
class Gamma(KernelSpec):
    """Gamma density x^{shape-1} e^{-x} / Gamma(shape) on x > 0."""

    shape: Scalar
    family: ClassVar[str] = "Gamma"

    def __post_init__(self):
        shape = as_scalar(self.shape)
        if not shape > 0:
            raise DomainError(f"Gamma shape must be positive, got {shape}")
        object.__setattr__(self, "shape", shape)

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        x = as_scalar(x)
        if x < 0:
            return EvalResult.exact(0)
        if x == 0:
            if self.shape < 1:
                return EvalResult.infinite()
            return EvalResult.exact(1 if self.shape == 1 else 0)
        shape, xf = to_float(self.shape), to_float(x)
        value = mpmath.power(xf, shape - 1) * mpmath.exp(-xf) / mpmath.gamma(shape)
        return EvalResult(value, 8 * unit_roundoff() * (1 + abs(shape - 1)) * value)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def discontinuity_points(self) -> frozenset:
        return frozenset({0}) if self.shape <= 1 else frozenset()

    @property
    def smoothness_class(self) -> float:
        return int(mpmath.ceil(to_float(self.shape))) - 2

    def params_json(self) -> dict[str, Any]:
        return {"shape": encode_scalar(self.shape)}


@dataclass(frozen=True)
class LambdaD(KernelSpec):
    """e^{-x} for x > 0, d at 0, zero for x < 0. Any real d is accepted."""

    d: Scalar
    family: ClassVar[str] = "LambdaD"

    def __post_init__(self):
        object.__setattr__(self, "d", as_scalar(self.d))

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        x = as_scalar(x)
        if x < 0:
            return EvalResult.exact(0)
        if x == 0:
            return EvalResult.exact(self.d)
        value = mpmath.exp(-to_float(x))
        return EvalResult(value, 2 * unit_roundoff() * (1 + abs(to_float(x))) * value)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def discontinuity_points(self) -> frozenset:
        return frozenset({0})

    @property
    def smoothness_class(self) -> float:
        return -1

    def params_json(self) -> dict[str, Any]:
        return {"d": encode_scalar(self.d)}


@dataclass(frozen=True)
class Heaviside(KernelSpec):
    family: ClassVar[str] = "Heaviside"

    def evaluate(self, x: Any) -> EvalResult:
        return EvalResult.exact(1 if as_scalar(x) >= 0 else 0)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def discontinuity_points(self) -> frozenset:
        return frozenset({0})

    @property
    def smoothness_class(self) -> float:
        return -1


@dataclass(frozen=True)
class Wallis(KernelSpec):
    """cos x on |x| <= pi/2, zero outside."""

    family: ClassVar[str] = "Wallis"

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        x = as_scalar(x)
        if x == 0:
            return EvalResult.exact(1)
        xf = to_float(x)
        if abs(xf) >= mpmath.pi / 2:
            return EvalResult.exact(0)
        return EvalResult(mpmath.cos(xf), 4 * unit_roundoff() * (1 + abs(xf)))

    @property
    def support(self) -> tuple[float, float]:
        return (-math.pi / 2, math.pi / 2)

    @property
    def smoothness_class(self) -> float:
        return 0


@dataclass(frozen=True)
class MBeta(KernelSpec):
    """(beta + 1) e^{-beta |x|} - beta e^{-(beta + 1) |x|}, positive on the whole line."""

    beta: Scalar
    family: ClassVar[str] = "MBeta"

    def __post_init__(self):
        beta = as_scalar(self.beta)
        if not beta > 0:
            raise DomainError(f"MBeta needs beta > 0, got {beta}")
        object.__setattr__(self, "beta", beta)

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        x = as_scalar(x)
        if x == 0:
            return EvalResult.exact(1)
        beta, t = to_float(self.beta), abs(to_float(x))
        first = (beta + 1) * mpmath.exp(-beta * t)
        second = beta * mpmath.exp(-(beta + 1) * t)
        value = first - second
        bound = 4 * unit_roundoff() * (1 + (beta + 1) * t) * (first + second)
        return EvalResult(value, bound)

    @property
    def smoothness_class(self) -> float:
        return 2

    def params_json(self) -> dict[str, Any]:
        return {"beta": encode_scalar(self.beta)}


@dataclass(frozen=True)
class Gauss(KernelSpec):
    """Standard normal density."""

    family: ClassVar[str] = "Gauss"

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        xf = to_float(as_scalar(x))
        value = mpmath.exp(-xf * xf / 2) / mpmath.sqrt(2 * mpmath.pi)
        return EvalResult(value, 4 * unit_roundoff() * (1 + xf * xf) * value)


@dataclass(frozen=True)
class PowerOf(KernelSpec):
    """x -> inner(x) ** exponent for a non-negative inner function."""

    inner: KernelSpec
    exponent: Scalar
    family: ClassVar[str] = "PowerOf"

    def __post_init__(self):
        exponent = as_scalar(self.exponent)
        if not exponent > 0:
            raise DomainError(f"Exponent must be positive, got {exponent}")
        object.__setattr__(self, "exponent", exponent)

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        base = self.inner.evaluate(x)
        if base.unbounded:
            return base
        v, b = base.value, base.abs_error_bound
        if v < -b:
            raise DomainError(
                f"Cannot raise the negative value {mpmath.nstr(to_float(v), 10)} "
                f"of {self.inner.family} at x={x} to a real power"
            )
        if v <= b:
            if b == 0:
                return EvalResult.exact(0)
            return EvalResult(0, mpmath.power(to_float(b), to_float(self.exponent)))
        if is_exact(v) and _is_integer(self.exponent) and b == 0:
            return EvalResult.exact(Fraction(v) ** int(self.exponent))
        e, vf, bf = to_float(self.exponent), to_float(v), to_float(b)
        value = mpmath.power(vf, e)
        upper = mpmath.power(vf + bf, e) - value
        lower = value - mpmath.power(max(vf - bf, 0), e)
        bound = max(upper, lower) + 4 * unit_roundoff() * (1 + abs(e)) * value
        return EvalResult(value, bound)

    @property
    def support(self) -> tuple[float, float]:
        return self.inner.support

    @property
    def discontinuity_points(self) -> frozenset:
        return self.inner.discontinuity_points

    @property
    def smoothness_class(self) -> float:
        if _is_integer(self.exponent):
            return self.inner.smoothness_class
        return min(self.inner.smoothness_class, 0)

    def params_json(self) -> dict[str, Any]:
        return {"inner": self.inner.to_json(), "exponent": encode_scalar(self.exponent)}


@dataclass(frozen=True)
class PolyOf(KernelSpec):
    """x -> c_0 + c_1 inner(x) + ... ; ``coeffs`` are stored lowest degree first."""

    inner: KernelSpec
    coeffs: tuple[Scalar, ...]
    family: ClassVar[str] = "PolyOf"

    def __post_init__(self):
        coeffs = tuple(as_scalar(c) for c in self.coeffs)
        if not coeffs:
            raise DimensionError("A polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def is_homothety(self) -> bool:
        nonzero = [i for i, c in enumerate(self.coeffs) if c != 0]
        return nonzero == [1] and self.coeffs[1] > 0

    @uses_working_precision
    def evaluate(self, x: Any) -> EvalResult:
        base = self.inner.evaluate(x)
        if base.unbounded:
            return base
        v, b = base.value, base.abs_error_bound
        if b == 0 and is_exact(v) and all(is_exact(c) for c in self.coeffs):
            value: Scalar = 0
            for c in reversed(self.coeffs):
                value = value * v + c
            return EvalResult.exact(value)
        vf, bf = to_float(v), to_float(b)
        value = mpmath.polyval([to_float(c) for c in reversed(self.coeffs)], vf)
        size = abs(vf)
        propagated = mpmath.fsum(
            abs(to_float(c)) * ((size + bf) ** i - size**i) for i, c in enumerate(self.coeffs)
        )
        magnitude = mpmath.fsum(abs(to_float(c)) * size**i for i, c in enumerate(self.coeffs))
        rounding = 4 * len(self.coeffs) * unit_roundoff() * magnitude
        return EvalResult(value, propagated + rounding)

    @property
    def support(self) -> tuple[float, float]:
        if self.coeffs[0] == 0:
            return self.inner.support
        return (-math.inf, math.inf)

    @property
    def discontinuity_points(self) -> frozenset:
        return self.inner.discontinuity_points

    @property
    def smoothness_class(self) -> float:
        return self.inner.smoothness_class

    def params_json(self) -> dict[str, Any]:
        return {
            "inner": self.inner.to_json(),
            "coeffs": [encode_scalar(c) for c in self.coeffs],
        }


@dataclass(frozen=True)
class IndicatorOf(KernelSpec):
    """x -> c where inner(x) > 0, else 0."""

    inner: KernelSpec
    c: Scalar
    family: ClassVar[str] = "IndicatorOf"

    def __post_init__(self):
        object.__setattr__(self, "c", as_scalar(self.c))

    def evaluate(self, x: Any) -> EvalResult:
        base = self.inner.evaluate(x)
        if base.unbounded or base.value > base.abs_error_bound:
            return EvalResult.exact(self.c)
        return EvalResult.exact(0)

    @property
    def support(self) -> tuple[float, float]:
        return self.inner.support

    @property
    def discontinuity_points(self) -> frozenset:
        lower, upper = self.inner.support
        edges = {edge for edge in (lower, upper) if math.isfinite(edge)}
        return self.inner.discontinuity_points | frozenset(edges)

    @property
    def smoothness_class(self) -> float:
        return -1

    def params_json(self) -> dict[str, Any]:
        return {"inner": self.inner.to_json(), "c": encode_scalar(self.c)}


# ---------------------------------------------------------------------------
# JSON encoding
# ---------------------------------------------------------------------------


def _decode_scalar(value: Any, name: str) -> Scalar:
    if isinstance(value, bool) or value is None:
        raise DomainError(f"Parameter {name!r} must be a number, got {value!r}")
    if isinstance(value, float):
        return to_exact(repr(value))
    if isinstance(value, (int, str)):
        return as_scalar(value)
    raise DomainError(f"Parameter {name!r} must be a number, got {value!r}")


def _param(params: Mapping[str, Any], name: str, family: str) -> Any:
    try:
        return params[name]
    except KeyError:
        raise DomainError(f"{family} needs parameter {name!r}") from None


def _scalar_list(params: Mapping[str, Any], name: str, family: str) -> list[Scalar]:
    values = _param(params, name, family)
    if not isinstance(values, list):
        raise DomainError(f"{family} parameter {name!r} must be a list")
    return [_decode_scalar(v, name) for v in values]


_DECODERS: dict[str, Callable[[Mapping[str, Any]], KernelSpec]] = {
    "HW": lambda p: HW(ParamVector(tuple(_scalar_list(p, "alpha", "HW")))),
    "OmegaQR": lambda p: OmegaQR(
        _decode_scalar(_param(p, "q", "OmegaQR"), "q"),
        _decode_scalar(_param(p, "r", "OmegaQR"), "r"),
    ),
    "Gamma": lambda p: Gamma(_decode_scalar(_param(p, "shape", "Gamma"), "shape")),
    "LambdaD": lambda p: LambdaD(_decode_scalar(_param(p, "d", "LambdaD"), "d")),
    "Heaviside": lambda p: Heaviside(),
    "Wallis": lambda p: Wallis(),
    "MBeta": lambda p: MBeta(_decode_scalar(_param(p, "beta", "MBeta"), "beta")),
    "Gauss": lambda p: Gauss(),
    "PowerOf": lambda p: PowerOf(
        kernel_from_json(_param(p, "inner", "PowerOf")),
        _decode_scalar(_param(p, "exponent", "PowerOf"), "exponent"),
    ),
    "PolyOf": lambda p: PolyOf(
        kernel_from_json(_param(p, "inner", "PolyOf")),
        tuple(_scalar_list(p, "coeffs", "PolyOf")),
    ),
    "IndicatorOf": lambda p: IndicatorOf(
        kernel_from_json(_param(p, "inner", "IndicatorOf")),
        _decode_scalar(_param(p, "c", "IndicatorOf"), "c"),
    ),
}

FAMILIES = tuple(_DECODERS)


def kernel_from_json(data: str | Mapping[str, Any]) -> KernelSpec:
    """Decode ``{"family": name, "params": {...}}`` (a dict or its JSON text)."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise DomainError(f"Kernel description is not valid JSON: {exc}") from exc
    if not isinstance(data, Mapping):
        raise DomainError("Kernel description must be a JSON object")
    family = data.get("family")
    decoder = _DECODERS.get(family) if isinstance(family, str) else None
    if decoder is None:
        raise DomainError(f"Unknown kernel family {family!r}; expected one of {FAMILIES}")
    params = data.get("params") or {}
    if not isinstance(params, Mapping):
        raise DomainError(f"{family} params must be a JSON object")
    return decoder(params)


@uses_working_precision
def evaluate(spec: KernelSpec, x: Any) -> EvalResult:
    if not isinstance(spec, KernelSpec):
        raise DomainError(f"Expected a KernelSpec, got {type(spec).__name__}")
    return spec.evaluate(x)


# ---------------------------------------------------------------------------
# Hirschman-Widder densities
# ---------------------------------------------------------------------------


def _min_gap(values: Sequence[mpmath.mpf]) -> mpmath.mpf:
    ordered = sorted(values)
    return min(b - a for a, b in zip(ordered, ordered[1:]))


def _hw_lower_bound(p: ParamVector, x: mpmath.mpf) -> mpmath.mpf:
    """P x^{m-1}/(m-1)! e^{-max(a) x}, a lower bound for the density at x > 0."""
    a = [to_float(v) for v in p.a]
    lead = mpmath.fprod(a) * x ** (p.m - 1) / mpmath.factorial(p.m - 1)
    return lead * mpmath.exp(-max(a) * x)


@uses_working_precision
def _hw_evaluate(p: ParamVector, x: Any) -> EvalResult:
    x = as_scalar(x)
    if x < 0:
        return EvalResult.exact(0)
    if x == 0:
        return hw_eval_series(p, 0, 1)
    if p.distinct:
        return hw_eval_additive(p, x)
    xf = to_float(x)
    return hw_eval_series(p, xf, unit_roundoff() * _hw_lower_bound(p, xf))


@uses_working_precision
def hw_eval_additive(p: ParamVector, x: Any) -> EvalResult:
    """sum_j a_j e^{-a_j x} prod_{k != j} a_k / (a_k - a_j) for x >= 0."""
    if not p.distinct:
        raise RequiresDistinctError(
            f"Additive form needs distinct parameters, got {p.alpha}; use hw_eval_series"
        )
    xf = to_float(as_scalar(x))
    if xf < 0:
        return EvalResult.exact(0)
    a = [to_float(v) for v in p.a]
    if len(a) > 1 and _min_gap(a) < SERIES_FALLBACK_GAP * max(a):
        LOGGER.debug("Parameters %s are clustered; using the Maclaurin series", p.alpha)
        tol = unit_roundoff() * _hw_lower_bound(p, xf) if xf > 0 else 1
        return hw_eval_series(p, xf, tol)
    terms = []
    for j, aj in enumerate(a):
        coeff = aj
        for k, ak in enumerate(a):
            if k != j:
                coeff *= ak / (ak - aj)
        terms.append(coeff * mpmath.exp(-aj * xf))
    value = mpmath.fsum(terms)
    m = len(a)
    bound = (3 * m + 6) * unit_roundoff() * (1 + max(a) * xf) * mpmath.fsum(abs(t) for t in terms)
    return EvalResult(value, bound)


@uses_working_precision
def hw_eval_series(p: ParamVector, x: Any, tol: Any) -> EvalResult:
    """Maclaurin series P sum_k (-1)^k h_k(a) x^{k+m-1} / (k+m-1)!, valid for repeats.

    Terms are summed at raised precision until the tail bound
    B (Ax)^{K+1} / (K+1)! / (1 - Ax/(K+2)) drops below tol/2, with
    B = P x^{m-1} / (m-1)! and A = max a_j.
    """
    tol = to_float(as_scalar(tol))
    if not tol > 0:
        raise DomainError(f"Series tolerance must be positive, got {tol}")
    x = as_scalar(x)
    if x < 0:
        raise DomainError(f"Series evaluation needs x >= 0, got {x}")
    m = p.m
    if x == 0:
        if m > 1:
            return EvalResult.exact(0)
        return EvalResult.exact(p.a[0]) if p.is_exact else EvalResult(to_float(p.a[0]), 0)

    outer_u = unit_roundoff()
    xf = to_float(x)
    a_outer = [to_float(v) for v in p.a]
    lead = mpmath.fprod(a_outer) * xf ** (m - 1) / mpmath.factorial(m - 1)
    ax = max(a_outer) * xf
    magnitude_bits = mpmath.log(lead, 2) + ax * mpmath.log(mpmath.e, 2) - mpmath.log(tol, 2)
    work_bits = mpmath.mp.prec + max(0, int(mpmath.ceil(magnitude_bits))) + GUARD_BITS

    with mpmath.workprec(work_bits):
        a = [to_float(v) for v in p.a]
        xw = to_float(x)
        prefactor = mpmath.fprod(a)
        ax = max(a) * xw
        lead = prefactor * xw ** (m - 1) / mpmath.factorial(m - 1)
        row = [mpmath.mpf(1)] * (m + 1)
        power = xw ** (m - 1) / mpmath.factorial(m - 1)
        tail_growth = lead
        total = mpmath.mpf(0)
        magnitude = mpmath.mpf(0)
        k = 0
        while True:
            term = prefactor * row[m] * power
            if k % 2:
                term = -term
            total += term
            magnitude += abs(term)
            tail_growth = tail_growth * ax / (k + 1)
            ratio = ax / (k + 2)
            if ratio < 0.5:
                tail = tail_growth / (1 - ratio)
                if tail <= tol / 2:
                    break
            if k >= MAX_SERIES_TERMS:
                raise DomainError(f"Series did not converge in {MAX_SERIES_TERMS} terms at x={x}")
            k += 1
            new_row = [mpmath.mpf(0)] * (m + 1)
            for j in range(1, m + 1):
                new_row[j] = new_row[j - 1] + a[j - 1] * row[j]
            row = new_row
            power = power * xw / (k + m - 1)
        rounding = 4 * (k + m + 2) * unit_roundoff() * magnitude

    value = +total
    LOGGER.debug(
        "hw_eval_series m=%d x=%s terms=%d bits=%d", m, mpmath.nstr(xf, 8), k + 1, work_bits
    )
    return EvalResult(value, tail + rounding + outer_u * abs(value))


@uses_working_precision
def hw_eval_determinantal(p: ParamVector, x: Any) -> EvalResult:
    """(a_1...a_m / V(a)) det[e^{-a_j x}; a_j^0; ...; a_j^{m-2}] for x > 0."""
    if not p.distinct:
        raise RequiresDistinctError(f"Determinantal form needs distinct parameters, got {p.alpha}")
    xf = to_float(as_scalar(x))
    if not xf > 0:
        raise DomainError(f"Determinantal form needs x > 0, got {xf}")
    u = unit_roundoff()
    a = [to_float(v) for v in p.a]
    m = len(a)
    first = [mpmath.exp(-aj * xf) for aj in a]
    rows = [first] + [[aj**i for aj in a] for i in range(m - 1)]
    errors = [2 * u * (1 + aj * xf) * v for aj, v in zip(a, first)]
    errors += [m * u * abs(v) for row in rows[1:] for v in row]
    det, det_bound = det_float(DenseMatrix.from_rows(rows), entry_errors=errors)
    scale = mpmath.fprod(a) / vandermonde(a)
    value = scale * det
    bound = abs(scale) * det_bound + 4 * m * m * u * abs(value)
    return EvalResult(value, bound)


def hw_moment(p: ParamVector, k: int) -> Scalar:
    """k-th moment k! h_k(alpha); exact for exact parameters."""
    if k < 0:
        raise DomainError(f"Moment order must be non-negative, got {k}")
    return math.factorial(k) * h_eval(p.alpha, k)


@uses_working_precision
def hw_laplace(p: ParamVector, s: Any) -> Scalar | mpmath.mpc:
    """prod_j 1 / (1 + alpha_j s) on the half-plane 1 + alpha_j Re s > 0."""
    if isinstance(s, (complex, mpmath.mpc)):
        s = mpmath.mpc(s)
        real = mpmath.re(s)
    else:
        s = as_scalar(s)
        real = s
    for alpha in p.alpha:
        if not 1 + alpha * real > 0:
            raise DomainError(f"s={s} is outside the half-plane Re s > -1/{alpha}")
    if is_exact(s) and p.is_exact:
        result: Scalar = Fraction(1)
        for alpha in p.alpha:
            result /= 1 + alpha * s
        return result
    s_value = s if isinstance(s, mpmath.mpc) else to_float(s)
    return mpmath.fprod(1 / (1 + to_float(alpha) * s_value) for alpha in p.alpha)


@uses_working_precision
def hw_mgf_partial_sum(p: ParamVector, z: Any, n: int) -> EvalResult:
    """sum_{k<=n} mu_k z^k / k! = sum_k h_k(alpha) z^k, which tends to prod 1 / (1 - alpha_j z)."""
    value = h_generating_partial_sum(p.alpha, z, n)
    return EvalResult(value, geometric_tail_bound(p.alpha, z, n))


def hw_derivatives_at_zero(p: ParamVector, n: int) -> list[Scalar]:
    """One-sided derivatives of orders m-1 .. m-1+n at 0: P (-1)^k h_k(a)."""
    if n < 0:
        raise DomainError(f"Number of extra derivatives must be non-negative, got {n}")
    prefactor: Scalar = 1
    for v in p.a:
        prefactor *= v
    table = h_table(p.a, n)
    return [prefactor * (-1) ** k * table[k] for k in range(n + 1)]


# ---------------------------------------------------------------------------
# Spherical (HCIZ) integral
# ---------------------------------------------------------------------------


def _require_distinct(values: Sequence[Scalar], name: str):
    for i in range(len(values)):
        for j in range(i):
            if values[i] == values[j]:
                raise DegenerateInputError(f"{name} has a repeated entry {values[i]}")


@uses_working_precision
def hciz_det(a: Sequence[Any], b: Sequence[Any]) -> EvalResult:
    """(prod_{j<m} j!) / (V(a) V(b)) det(e^{b_i a_j})."""
    a_values = [to_float(as_scalar(v)) for v in a]
    b_values = [to_float(as_scalar(v)) for v in b]
    if not a_values or len(a_values) != len(b_values):
        raise DimensionError(
            f"Need equal non-empty lengths, got {len(a_values)} and {len(b_values)}"
        )
    _require_distinct(a_values, "a")
    _require_distinct(b_values, "b")
    u = unit_roundoff()
    m = len(a_values)
    rows = [[mpmath.exp(bi * aj) for aj in a_values] for bi in b_values]
    errors = [
        2 * u * (1 + abs(bi * aj)) * rows[i][j]
        for i, bi in enumerate(b_values)
        for j, aj in enumerate(a_values)
    ]
    det, det_bound = det_float(DenseMatrix.from_rows(rows), entry_errors=errors)
    constant = math.prod(math.factorial(j) for j in range(m))
    scale = constant / (vandermonde(a_values) * vandermonde(b_values))
    value = scale * det
    return EvalResult(value, abs(scale) * det_bound + 4 * m * m * u * abs(value))


@uses_working_precision
def hciz_series(a: Sequence[Any], x: Any, n: int) -> EvalResult:
    """(m-1)! sum_{j<=n} h_j(a) x^j / (j+m-1)! with a geometric tail estimate."""
    if n < 1:
        raise DomainError(f"Number of terms must be positive, got {n}")
    values = [to_float(as_scalar(v)) for v in a]
    if not values:
        raise DimensionError("hciz_series needs at least one entry")
    for v in values:
        if not v > 0:
            raise DomainError(f"Entries must be positive, got {v}")
    m = len(values)
    xf = to_float(as_scalar(x))
    table = h_table(values, n)
    total = mpmath.mpf(0)
    magnitude = mpmath.mpf(0)
    power = mpmath.mpf(1)
    for j in range(n + 1):
        term = table[j] * power / mpmath.factorial(j + m - 1)
        total += term
        magnitude += abs(term)
        power *= xf
    scale = mpmath.factorial(m - 1)
    value = scale * total
    growth = max(values) * abs(xf)
    if growth >= n + 2:
        tail = mpmath.inf
    else:
        tail = growth ** (n + 1) / mpmath.factorial(n + 1) / (1 - growth / (n + 2))
    rounding = 4 * (n + m) * unit_roundoff() * scale * magnitude
    if tail == mpmath.inf:
        LOGGER.warning("hciz_series: %d terms give no tail bound at |x|=%s", n, mpmath.nstr(xf, 8))
        return EvalResult(value, mpmath.inf, unbounded=True)
    return EvalResult(value, tail + rounding)


def _terms_for(growth: mpmath.mpf) -> int:
    return int(mpmath.ceil(2 * mpmath.e * growth)) + 60


@uses_working_precision
def hciz_density_cross_check(a: Sequence[Any], t: Any) -> tuple[EvalResult, EvalResult]:
    """Both sides of f(-t) = (m-1)! t^{-(m-1)} Lambda_{1/a}(t) / prod a_j for t > 0.

    Returns the series value of the left side and the density-based right side.
    """
    tf = to_float(as_scalar(t))
    if not tf > 0:
        raise DomainError(f"Cross-check needs t > 0, got {tf}")
    values = [as_scalar(v) for v in a]
    params = ParamVector.from_reciprocals(values)
    n = _terms_for(max(to_float(v) for v in values) * tf)
    lhs = hciz_series(values, -tf, n)
    density = _hw_evaluate(params, tf)
    m = params.m
    scale = mpmath.factorial(m - 1) / (tf ** (m - 1) * mpmath.fprod(to_float(v) for v in values))
    rhs = EvalResult(scale * density.value, scale * density.abs_error_bound)
    return lhs, rhs
