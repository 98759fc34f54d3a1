"""Exception types shared across the package."""


class EntropySentryError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(EntropySentryError, ValueError):
    """A parameter combination cannot satisfy the requested computation."""


class ParseError(EntropySentryError, ValueError):
    """Malformed input file; the message carries the source name and line number."""
