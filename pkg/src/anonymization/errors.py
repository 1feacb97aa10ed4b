"""
Glassbox — Errors
Exception hierarchy shared by the anonymization, attack and I/O layers.
"""

from typing import Optional


class GlassboxError(Exception):
    """Base class for every error raised by the toolkit."""


class SchemaError(GlassboxError, ValueError):
    """Schema, configuration or data-domain violation.

    Carries an optional (row, column) location for parse errors.
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DuplicateIdError(SchemaError):
    """Two records share one identifier."""


class InconsistentPublicationError(GlassboxError):
    """The published table cannot have been produced from the given inputs."""


class EnumerationLimitError(GlassboxError):
    """An exhaustive enumeration would exceed its configured limit."""

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f"{what}: {size} exceeds the configured limit of {limit}")


class InfeasibleError(GlassboxError):
    """No output satisfies the requested privacy constraint."""


class UnmaskableError(InfeasibleError):
    """Mask found violating groups but no group to copy a distribution from."""


class AssignInvariantError(GlassboxError, AssertionError):
    """Assign was driven on a residue that is not l-eligible."""
