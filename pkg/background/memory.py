"""Bounded event memory the background trader conditions on."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, Iterator, List, Optional, Tuple

from core.models import DepthSnapshot, EventType

DEFAULT_MEMORY_LENGTH = 50


@dataclass(frozen=True)
class MemoryEntry:
    event_type: EventType
    inter_arrival: float
    snapshot: Optional[DepthSnapshot]
    time: float


class BTMemory:
    """Ring buffer of the last ``length`` events, times in seconds from the open."""

    def __init__(self, length: int = DEFAULT_MEMORY_LENGTH) -> None:
        if length < 1:
            raise ValueError("Memory length must be at least 1.")
        self.length = length
        self._entries: Deque[MemoryEntry] = deque(maxlen=length)
        self.total_appended = 0
        self.last_time = 0.0

    def append(self, event_type: int, time: float, snapshot: Optional[DepthSnapshot]) -> MemoryEntry:
        if time < self.last_time:
            raise ValueError(f"Memory is chronological; got {time} after {self.last_time}.")
        entry = MemoryEntry(
            event_type=EventType(event_type),
            inter_arrival=time - self.last_time,
            snapshot=snapshot,
            time=time,
        )
        self._entries.append(entry)
        self.last_time = time
        self.total_appended += 1
        return entry

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[MemoryEntry]:
        return iter(self._entries)

    def as_events(self) -> List[Tuple[int, float, Optional[DepthSnapshot]]]:
        """Returns ``(type, time, snapshot)`` triples for intensity replay."""
        return [(int(entry.event_type), entry.time, entry.snapshot) for entry in self._entries]
