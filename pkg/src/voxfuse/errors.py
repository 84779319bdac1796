"""Exception types shared across the toolkit."""


class VoxfuseError(Exception):
    """Base class for all toolkit errors."""


class ArchiveFormatError(VoxfuseError):
    """Archive does not start with the expected magic/version header."""


class ArchiveCorruptionError(VoxfuseError):
    """Archive header is valid but the payload is truncated or malformed."""


class DuplicateKeyError(VoxfuseError):
    """Two records share a (speaker, utterance, augmentation) key."""


class ParseError(VoxfuseError):
    """A text input (trial list, manifest, config) failed to parse."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeError(VoxfuseError):
    """An array argument has the wrong length or shape."""


class DegenerateInputError(VoxfuseError):
    """Numerically degenerate input (zero vector, empty list, ...)."""


class MissingEmbeddingError(VoxfuseError):
    """A trial participant has no embedding in the loaded archives."""


class NonFiniteError(VoxfuseError):
    """A loss or gradient became NaN/Inf."""


class ConfigError(VoxfuseError):
    """Run configuration is invalid or references missing files."""
