"""Exception hierarchy.

Every error carries a stable ``code`` (its class name) and an ``exit_code`` used
by the command-line front end: 2 for validation failures, 3 for infeasibility or
exhausted sampling budgets, 4 for configuration problems.
"""

from __future__ import annotations

from typing import Any


class PeerTestError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.__class__.__name__)
        self.details = details

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"error": self.code, "exit_code": self.exit_code, "message": str(self)}
        out.update({k: v for k, v in self.details.items()})
        return out


class ValidationError(PeerTestError):
    exit_code = 2


class BudgetError(PeerTestError):
    exit_code = 3


class ConfigError(PeerTestError):
    exit_code = 4


# instance / assignment / profile structure
class ShapeMismatch(ValidationError):
    pass


class LoadMismatch(ValidationError):
    pass


class AuthorshipOutsideConflict(ValidationError):
    pass


class RowLoadViolation(ValidationError):
    pass


class ColumnLoadViolation(ValidationError):
    pass


class ConflictAssigned(ValidationError):
    pass


class NotAPermutation(ValidationError):
    pass


class UnassignedWorkRanked(ValidationError):
    pass


class MissingReviewer(ValidationError):
    pass


class SupervisionAssignmentMismatch(ValidationError):
    pass


class TopologyDegreeMismatch(ValidationError):
    pass


class RankOutOfRange(ValidationError):
    pass


class ParseError(ValidationError):
    pass


# sampling budgets
class InfeasibleOrRejectionBudgetExhausted(BudgetError):
    pass


class RejectionBudgetExhausted(BudgetError):
    pass


class EnumerationTooLarge(BudgetError):
    pass


class CapExceededWithoutSeed(BudgetError):
    pass


# configuration
class UnknownPreset(ConfigError):
    pass


class InvalidGrid(ConfigError):
    pass


class EmptyMix(ConfigError):
    pass


class InvalidTestConfig(ConfigError):
    pass


class EmptyNullDistribution(ConfigError):
    pass
