"""Exception types shared across the package.

Every error raised on a user-facing path is one of these, so the CLI can
map them onto stable exit codes.
"""


class CfboundsError(Exception):
    """Base class for all package errors."""


class SchemaError(CfboundsError):
    """Malformed or inconsistent model, data, or query input."""


class CycleError(CfboundsError):
    """A directed cycle where a DAG is required."""


class ZeroEvidenceError(CfboundsError):
    """Conditioning event has probability exactly zero."""


class CardinalityOverflow(CfboundsError):
    """Canonical exogenous domain would exceed the configured guard."""

    def __init__(self, child: str, size, guard: int, size_expr: str | None = None):
        self.child = child
        self.size = size
        self.guard = guard
        self.size_expr = size_expr or str(size)
        super().__init__(
            f"canonical exogenous domain for {child!r} has {self.size_expr} states, "
            f"which exceeds the guard of {guard}"
        )


class MissingPriorError(CfboundsError):
    """An operation needs exogenous priors the model does not carry."""


class UndefinedQuery(CfboundsError):
    """The query conditions on an event of probability zero."""


class TooLargeError(CfboundsError):
    """Exhaustive enumeration refused: joint exogenous domain above cap."""


class EmDegenerateError(CfboundsError):
    """A record admits no exogenous explanation, so no prior has finite likelihood."""


class NoConvergedRunsError(CfboundsError):
    """Every restart failed to reach a finite log-likelihood."""
