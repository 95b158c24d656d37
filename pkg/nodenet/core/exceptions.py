"""
Exception hierarchy shared by every NodeNet app.

Library code raises these; the management commands translate them into
``CommandError`` so the process exits with a nonzero status.
"""
from typing import Optional


class NodeNetError(Exception):
    """Base class for all NodeNet errors."""


class DatasetFormatError(NodeNetError):
    """A dataset file does not follow the expected layout."""

    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        location = ''
        if path:
            location += f"{path}"
        if line_number is not None:
            location += f"{':' if path else 'line '}{line_number}"
        super().__init__(f"{location}: {message}" if location else message)


class SplitError(NodeNetError):
    """A train/validation/test split cannot be built as requested."""


class FeaturizeError(NodeNetError):
    """Feature transformation was requested on unsuitable input."""


class ShapeError(NodeNetError):
    """Array shapes disagree with the configured network or model."""


class ConfigError(NodeNetError):
    """Invalid configuration value or file."""


class DivergenceError(NodeNetError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}" if epoch is not None else message)


class CheckpointError(NodeNetError):
    """A checkpoint file is missing, corrupt or of an unknown version."""


class GradientCheckError(NodeNetError):
    """Analytic gradients disagree with finite differences."""
