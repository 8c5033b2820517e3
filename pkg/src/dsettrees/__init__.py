"""Finite trees of D-sets: construction, relations, reconstruction, amalgamation."""

from .errors import ArgumentError, DataError, InconsistencyError, ParseError

__all__ = ["ArgumentError", "DataError", "InconsistencyError", "ParseError"]
