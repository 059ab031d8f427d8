class DomainError(ValueError):
    """Input outside an operation's domain."""


class CapacityError(RuntimeError):
    """An enumeration or oracle guard would be exceeded."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class TraceFormatError(ValueError):
    """Malformed trace file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    pass
