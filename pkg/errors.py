"""Exception types raised by PolyaLab.

Everything derives from ``ValueError`` so callers can keep catching the
broad type; the CLI uses the concrete classes to choose exit codes.
"""

from __future__ import annotations


class PolyaLabError(ValueError):
    """Base class for all library errors."""


class DimensionError(PolyaLabError):
    """Matrix or vector shapes do not fit the operation."""


class DomainError(PolyaLabError):
    """An argument lies outside the domain where the operation is defined."""


class InconsistentInputError(PolyaLabError):
    """Data cannot come from a genuine parameter vector (complex or non-positive roots)."""


class DegenerateInputError(PolyaLabError):
    """Coincident nodes or a vanishing leading quantity."""


class RequiresDistinctError(DegenerateInputError):
    """A closed form needs pairwise distinct parameters."""


class GridError(PolyaLabError):
    """Sample grids are not strictly increasing or have mismatched lengths."""


class SamplingError(PolyaLabError):
    """A kernel is unbounded at one of the sampled differences."""


class ModeError(PolyaLabError):
    """An option combination is not valid, e.g. Fekete mode below full order."""


class PreconditionError(PolyaLabError):
    """A structural precondition of an experiment does not hold."""


class BudgetExceededError(PolyaLabError):
    """Minor enumeration would exceed the configured budget."""

    def __init__(self, requested: int, limit: int):
        super().__init__(f"Minor budget exceeded: {requested} requested, limit {limit}")
        self.requested = requested
        self.limit = limit
