"""Finite approximation of group actions on tournaments, graphs and metric spaces."""
from .groups import (
    FiniteQuotient,
    Group,
    NotFound,
    PreconditionError,
    Subgroup,
    Unknown,
    UnsupportedError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "FiniteQuotient",
    "Group",
    "NotFound",
    "PreconditionError",
    "Subgroup",
    "Unknown",
    "UnsupportedError",
    "UsageError",
]
