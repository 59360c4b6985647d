"""Exception types shared across the package."""


class ReconxferError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ReconxferError):
    """Invalid architecture, split or experiment configuration."""


class ShapeError(ReconxferError):
    """Array shape does not match the declared interface."""


class StaleTapeError(ReconxferError):
    """backward() called with a tape from an older parameter version."""


class TrainingError(ReconxferError):
    """Non-finite loss or gradient during training."""


class IdxParseError(ReconxferError):
    """Malformed IDX byte stream; carries the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DataError(ReconxferError):
    """Missing or inconsistent dataset content."""
