"""In-memory store of per-repetition results with deduplication and logging."""

from __future__ import annotations

import logging
from typing import Dict, Generic, List, Tuple, TypeVar

T = TypeVar("T")


class RunStore(Generic[T]):
    """Stores one value per (condition, repetition) pair.

    Values come back ordered by repetition regardless of the order in which
    parallel workers finished.
    """

    def __init__(self) -> None:
        self._values: Dict[str, Dict[int, T]] = {}
        self._order: List[str] = []
        self._logger = logging.getLogger(self.__class__.__name__)

    def insert(self, condition: str, repetition: int, value: T) -> bool:
        """Inserts a value unless that repetition has already been stored."""
        bucket = self._values.get(condition)
        if bucket is None:
            bucket = self._values[condition] = {}
            self._order.append(condition)
        if repetition in bucket:
            self._logger.debug("Skipping duplicate result %s#%d.", condition, repetition)
            return False
        bucket[repetition] = value
        self._logger.debug("Stored result %s#%d.", condition, repetition)
        return True

    def values(self, condition: str) -> List[T]:
        bucket = self._values.get(condition, {})
        return [bucket[rep] for rep in sorted(bucket)]

    def items(self, condition: str) -> List[Tuple[int, T]]:
        bucket = self._values.get(condition, {})
        return sorted(bucket.items())

    def conditions(self) -> List[str]:
        """Conditions in first-insertion order."""
        return list(self._order)

    def count(self) -> int:
        return sum(len(bucket) for bucket in self._values.values())

    def clear(self) -> None:
        self._values.clear()
        self._order.clear()
