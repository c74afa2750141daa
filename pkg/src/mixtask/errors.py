"""Shared exception types."""


class MixtaskError(Exception):
    """Base class for all package errors."""


class UnknownEntity(MixtaskError):
    """A primitive parameter names an object/furniture/agent not in the state."""


class PreconditionViolated(MixtaskError):
    """A primitive's symbolic precondition does not hold in the given state."""


class ParseError(MixtaskError):
    """Malformed scenario/script/log document."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(MixtaskError):
    """Structurally parseable document that violates a semantic invariant."""


class MissingEntry(MixtaskError):
    """Queried (state, primitive) pair has no table entry."""


class IncompleteAssignment(MixtaskError):
    """Assignment does not cover every remaining step."""


class TooManySteps(MixtaskError):
    """Remaining-step count exceeds the exhaustive enumeration bound."""


class InfeasibleAllocation(MixtaskError):
    """No assignment satisfies the constraints even after full relaxation."""


class InvalidProgram(MixtaskError):
    """Strategy program failed structural validation."""


class UnknownStepRef(MixtaskError):
    """Verbal act references a step outside the plan."""


class PlanExhausted(MixtaskError):
    """All plan steps are already complete."""


class MalformedLog(MixtaskError):
    """Trial log violates its structural invariants."""


class ConfigError(MixtaskError):
    """Invalid trial/suite/adapter configuration."""


class SessionClosed(MixtaskError):
    """Interactive session channel closed while a trial was waiting on it."""
