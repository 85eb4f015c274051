"""Exception hierarchy shared by every memharbor module."""


class MemHarborError(Exception):
    """Base class for all library errors."""


class DuplicateId(MemHarborError):
    pass


class DimensionMismatch(MemHarborError, ValueError):
    pass


class InvalidEmbedding(MemHarborError, ValueError):
    pass


class InvalidRecord(MemHarborError, ValueError):
    pass


class ParseError(MemHarborError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedVersion(MemHarborError, ValueError):
    pass


class FutureMemory(MemHarborError, ValueError):
    pass


class NoDimensions(MemHarborError, ValueError):
    pass


class InvalidThreshold(MemHarborError, ValueError):
    pass


class UnresolvedMention(MemHarborError):
    pass


class NotFound(MemHarborError, LookupError):
    pass


class InvalidMetric(MemHarborError, ValueError):
    pass


class ConfigError(MemHarborError, ValueError):
    pass
