"""Exception hierarchy shared across the toolkit.

DataError and its subclasses map to CLI exit code 2; anything else escaping a
command is an internal error (exit code 3).
"""


class MflError(Exception):
    """Base class for all toolkit errors."""


class UsageError(MflError):
    """Bad command-line invocation (CLI exit code 1)."""


class DataError(MflError):
    """Invalid, malformed, or inconsistent input data."""


class ScanFormatError(DataError):
    """Scan file violates the binary scan format."""


class ReportFormatError(DataError):
    """Annotation report violates the report schema."""


class AlignmentError(DataError):
    """Report coordinates cannot be reconciled with the scan signal."""


class ConfigError(DataError):
    """Configuration violates its invariants."""
