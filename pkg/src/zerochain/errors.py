"""Semantic exception hierarchy for the zerochain library."""


class ZerochainError(Exception):
    """Base class for all library errors."""


class DomainError(ZerochainError, ValueError):
    """Input outside the mathematical domain (non-finite, wrong shape, ...)."""


class UnsupportedOrderError(ZerochainError, ValueError):
    """Derivative order not available for this function or instance."""


class DegenerateBudgetError(ZerochainError, ValueError):
    """Scaling produced a chain length T < 1; the bound is vacuous."""


class VacuousBoundError(DegenerateBudgetError):
    """Distance scaling with sigma > D; every method needs at least one step."""


class SolverError(ZerochainError, RuntimeError):
    """An iterative solver failed to converge; carries diagnostics."""


class NumericalRankError(ZerochainError, RuntimeError):
    """Orthogonal complement numerically rank-deficient after retries."""


class TraceCapacityError(ZerochainError, RuntimeError):
    """Trace exceeded its configured query cap."""


class UsageError(ZerochainError, ValueError):
    """Bad CLI/config usage (maps to exit code 2)."""
