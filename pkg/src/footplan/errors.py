"""Exception types shared across the package."""

from __future__ import annotations


class FootplanError(Exception):
    """Base class for all package errors."""


class ParseError(FootplanError):
    """A scene/robot/plan document could not be parsed.

    Carries the 1-based line/column of the offending location when known.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(FootplanError):
    """A document parsed but violates a structural invariant."""


class InvalidParams(FootplanError):
    """Generator or query parameters outside their documented range."""


class EmptyCandidates(FootplanError):
    """No contact surface is reachable for an effector at a root pose."""

    def __init__(self, effector: int, step_index: int | None = None):
        where = f" at step {step_index}" if step_index is not None else ""
        super().__init__(f"no reachable surface for effector {effector}{where}")
        self.effector = effector
        self.step_index = step_index


class SteeringInfeasible(FootplanError):
    """A steering axis cannot be synchronized to the requested duration."""


class GuideNotFound(FootplanError):
    """The root planner exhausted its iteration budget without a solution."""


class OverflowGuard(FootplanError):
    """A constraint coefficient exceeded the magnitude guard."""


class InfeasibleSelection(FootplanError):
    """A fixed surface selection admits no feasible footstep placement."""


class NumericalBreakdown(FootplanError):
    """A solver hit a condition failure (singular basis, NaN, ...)."""


class TooLarge(FootplanError):
    """Exhaustive enumeration refused: combination count above the guard."""


class BigMTooSmall(FootplanError):
    """A deactivated constraint is binding at the full big-M relaxation."""


class PlanningFailed(FootplanError):
    """End-to-end planning failure with the stage that caused it."""

    def __init__(self, stage: str, cause: str, detail: Exception | None = None):
        super().__init__(f"planning failed in stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
        self.detail = detail
