"""Exception hierarchy shared across the pipeline."""
from __future__ import annotations


class ContactGroundError(Exception):
    """Base class for every error raised by this package."""


# --- language model gateway ---------------------------------------------


class TemplateError(ContactGroundError):
    """Prompt template bindings do not match the placeholder set."""


class SchemaNotRegisteredError(ContactGroundError):
    """A chat request referenced an unknown structured-output schema."""


class BackendUnavailableError(ContactGroundError):
    """A remote model backend is unreachable (transport-level failure)."""


class GatewayTransportError(BackendUnavailableError):
    """The chat backend could not be reached or returned a transport error."""


class UnscriptedInputError(ContactGroundError):
    """The scripted backend has no entry matching the request."""


class StructuredOutputError(ContactGroundError):
    """Model output failed schema validation after exhausting retries."""

    def __init__(self, message: str, attempts: int, raw_text: str = ""):
        super().__init__(message)
        self.attempts = attempts
        self.raw_text = raw_text


# --- vision gateway -----------------------------------------------------


class VisionBackendError(ContactGroundError):
    """Segmentation/detection backend failure."""


class VisionUnavailableError(BackendUnavailableError, VisionBackendError):
    """A remote vision backend is unreachable (transport-level failure)."""


class DegenerateHeatmapError(ContactGroundError):
    """Segmentation produced an all-zero activation map."""


class MissingDetectionError(ContactGroundError):
    """No bounding box found for a required object."""

    def __init__(self, object_desc: str):
        super().__init__(f"no detection for object: {object_desc!r}")
        self.object_desc = object_desc


# --- expression evaluator -----------------------------------------------


class ExpressionError(ContactGroundError):
    pass


class ExpressionParseError(ExpressionError):
    """Invalid expression text; carries the byte offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExpressionEvalError(ExpressionError):
    """Arithmetic failure during evaluation (division by zero)."""


# --- contact resolution -------------------------------------------------


class DepthMissingError(ContactGroundError):
    """No 3D point available near the requested pixel."""


class InvalidTaskError(ContactGroundError):
    """A contact task violates its invariants and cannot be emitted."""


class SinkError(ContactGroundError):
    """The configured task sink is unreachable or rejected the payload."""


# --- sessions and benchmark ---------------------------------------------


class SessionError(ContactGroundError):
    pass


class UnknownSessionError(SessionError):
    pass


class FrameMismatchError(SessionError):
    """Image, point cloud, or extrinsics in a frame bundle disagree."""


class BudgetExhaustedError(SessionError):
    """A practice trial received more prompts than its budget allows."""


class DatasetError(ContactGroundError):
    """Benchmark dataset manifest or record failed validation."""


class ConfigError(ContactGroundError):
    pass
