"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration or CLI usage."""


class DataError(ValueError):
    """Malformed or unreadable input data (CSV files, shape mismatches at I/O)."""


class NumericalError(RuntimeError):
    """A linear solve or factorization failed beyond recoverable jitter."""
