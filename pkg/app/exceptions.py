"""
Toolkit errors.
Library code raises these; the command line catches them, logs and exits non-zero.
"""


class ToolkitError(RuntimeError):
    """Base class for every error the toolkit raises on purpose."""


class AlignmentError(ToolkitError):
    """Parallel files do not have the same number of lines."""


class ContaminationError(ToolkitError):
    """A reserved token was found in raw corpus text."""


class TagInvariantError(ToolkitError):
    """Tagging rules violated (double tag, wrong side)."""


class DirectionMismatchError(ToolkitError):
    """Corpora with different language directions were combined."""


class TagMismatchError(ToolkitError):
    """Requested start tag is not consistent with how the model was trained."""


class ConfigError(ToolkitError):
    """Invalid configuration; the message names the offending key."""

    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


class CheckpointError(ToolkitError):
    """Checkpoint unreadable, truncated, of another version or shape."""


class DivergenceError(ToolkitError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, step: int, last_checkpoint=None):
        super().__init__(message)
        self.step = step
        self.last_checkpoint = last_checkpoint


class DecodeError(ToolkitError):
    """Decoding could not run for an input."""


class EmptyInputError(ToolkitError):
    """An operation that needs data received none."""


class NonFiniteError(ToolkitError):
    """A value that must be finite (loss, gradient, parameter) is not."""
