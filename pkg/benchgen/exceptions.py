"""
Custom exceptions for benchgen.

This module defines library-specific exceptions that carry the structured
context (byte offsets, schema paths, residual collisions, generation reports)
the pipelines need to turn failures into feedback.
"""

from typing import Any, List, Optional, Tuple


class BenchGenError(Exception):
    """Base exception for all benchgen errors."""
    pass


class ConfigurationError(BenchGenError):
    """Raised when there's an issue with configuration or the environment."""
    pass


class InvalidInputError(BenchGenError, ValueError):
    """Raised when a value violates a domain invariant (non-finite, out of range)."""
    pass


class PlanParseError(BenchGenError):
    """
    Raised when a scene plan or task document cannot be parsed.

    Attributes:
        offset: Byte offset of a JSON syntax error, if any
        path: Schema path of the offending element (e.g. ``predicates[0].type``)
    """

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        super().__init__(message)
        self.offset = offset
        self.path = path


class SolveFailure(BenchGenError):
    """
    Raised when the spatial solver exhausts every margin.

    Attributes:
        collisions: Residual colliding object pairs at the last margin
        margin: The last margin tried, in meters
    """

    def __init__(self, message: str, collisions: List[Tuple[str, str]], margin: float):
        super().__init__(message)
        self.collisions = list(collisions)
        self.margin = margin


class PlacementFailure(BenchGenError):
    """
    Raised when stacking or containment cannot place an object.

    Attributes:
        support: Name of the crowded support or undersized container
        attempts: Number of sampling attempts made (0 for containment)
    """

    def __init__(self, message: str, support: str, attempts: int = 0):
        super().__init__(message)
        self.support = support
        self.attempts = attempts


class LLMError(BenchGenError):
    """Raised when a chat-completion request fails."""
    pass


class LLMReplayMissError(LLMError):
    """Raised in replay mode when no transcript is recorded for a request."""

    def __init__(self, message: str, request_hash: str):
        super().__init__(message)
        self.request_hash = request_hash


class LLMResponseError(LLMError):
    """Raised when a model response cannot be parsed after retries."""
    pass


class GenerationError(BenchGenError):
    """
    Raised when a generate -> validate -> refine loop runs out of attempts.

    Attributes:
        report: The GenReport describing every attempt
    """

    def __init__(self, message: str, report: Any):
        super().__init__(message)
        self.report = report


class TaskValidationError(BenchGenError):
    """Raised when a task specification breaks a construction invariant."""
    pass


class EvaluationError(BenchGenError):
    """Raised when a condition references objects or tasks that do not exist."""
    pass


class MetricsError(BenchGenError):
    """Raised when trajectory metrics cannot be computed."""
    pass


class SensitivityError(BenchGenError):
    """Raised when the sensitivity analysis lacks the data it needs."""
    pass


class FileOperationError(BenchGenError):
    """Raised when file operations fail."""
    pass
