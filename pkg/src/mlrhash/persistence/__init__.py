"""
Persistence for run ledgers, binary artifacts and atomic file output.
"""

from .store import SQLiteRunStore

__all__ = ["SQLiteRunStore"]
