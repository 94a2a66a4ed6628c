"""Exception types shared across the solver and the experiment harness."""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateMomentsError(RuntimeError):
    """Moments with non-positive density or temperature at some node.

    Carries enough context to locate the offending node; ``stage`` is
    filled in by the time stepper when the failure happens inside a
    stage solve.
    """

    def __init__(
        self,
        message: str,
        *,
        cell: int | None = None,
        node: int | None = None,
        stage: int | None = None,
    ) -> None:
        super().__init__(message)
        self.cell = cell
        self.node = node
        self.stage = stage


class SingularTableauError(ValueError):
    """A tableau operation needs an invertible implicit block and it is not."""


class StepFailureError(RuntimeError):
    """A time step could not be completed (blowup or degenerate moments)."""

    def __init__(
        self,
        message: str,
        *,
        time: float | None = None,
        step: int | None = None,
        stage: int | None = None,
    ) -> None:
        super().__init__(message)
        self.time = time
        self.step = step
        self.stage = stage


class ConfigError(ValueError):
    """A run configuration or tableau file could not be parsed or validated."""
