"""Exception hierarchy for leontief-mech.

Every error derives from ``ValueError`` through ``MechanismError`` so callers that
only care about "bad input or failed precondition" can catch one type.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from leontief_mech.virtual import ConditionVerdict


class MechanismError(ValueError):
    """Base class for all library errors."""


class ConfigError(MechanismError):
    """Invalid run configuration; ``key`` names the offending setting."""

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class DomainError(MechanismError):
    """A type (v, k) lies outside the supported domain."""


class DistributionError(MechanismError):
    """A distribution could not be built (bad family, bad CSV, irregular mesh)."""


class DegenerateDensityError(MechanismError):
    """The conditional density vanishes where a virtual valuation is needed."""


class NonUniqueRootError(MechanismError):
    """The virtual valuation crosses zero more than once for some ratio."""


class ConditionNotMetError(MechanismError):
    """A distribution condition required upstream does not hold."""

    def __init__(self, verdict: ConditionVerdict) -> None:
        self.verdict = verdict
        super().__init__(f"Condition {verdict.condition} does not hold (margin {verdict.margin:.3g})")


class InvalidCurveError(MechanismError):
    """A threshold curve violates the ratio-dependent price conditions."""

    def __init__(self, message: str, pair: tuple[float, float]) -> None:
        self.pair = pair
        super().__init__(f"{message} at k={pair[0]:.6g}, k'={pair[1]:.6g}")


class MonotonicityError(MechanismError):
    """An allocation is not nondecreasing in value for some ratio."""


class PreconditionError(MechanismError):
    """An operation was called on an instance outside its stated preconditions."""

    def __init__(self, message: str, witness: Any = None) -> None:
        self.witness = witness
        super().__init__(message)


class SearchSizeError(MechanismError):
    """The exhaustive threshold search was asked for more nodes than allowed."""


class ImprovementError(MechanismError):
    """An improvement transform produced output that breaks its own guarantee."""
