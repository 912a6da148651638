"""Exception hierarchy shared across the package."""


class BotforgeError(Exception):
    """Base class for all package errors."""


class SchemaError(BotforgeError):
    """A document or config value violates its schema.

    Carries the field path and the offending value so callers can report
    exactly what was wrong.
    """

    def __init__(self, path: str, message: str, value=None):
        self.path = path
        self.value = value
        super().__init__(f"{path}: {message}" + (f" (got {value!r})" if value is not None else ""))


class ValidationError(BotforgeError):
    """A populated object violates a domain invariant."""


class BackendError(BotforgeError):
    """A content backend failed after exhausting its retries."""

    def __init__(self, message: str, raw_text: str | None = None):
        self.raw_text = raw_text
        super().__init__(message)


class ManifestError(BotforgeError):
    """An output directory's manifest is missing, corrupt, or inconsistent."""
