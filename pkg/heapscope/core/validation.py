"""Event stream validation and exact footprint accounting.

This module provides:
- FootprintLedger: incremental live-allocation table with footprint and peak
- ViolationReason / ValidationResult: outcome of validating an event stream
- EventStreamValidator: streaming checker used by replay
- validate_event_stream: first-offence checker for AllocEvent sequences
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional

from .models import AllocEvent, EventKind


class FootprintLedger:
    """Exact live-allocation accounting.

    Keeps an ``alloc_id -> size`` table, the running footprint and the
    peak. Used as the shim's side table, by the validator and as the
    replay oracle.
    """

    __slots__ = ("_live", "_footprint", "_peak")

    def __init__(self) -> None:
        self._live: Dict[int, int] = {}
        self._footprint = 0
        self._peak = 0

    @property
    def footprint(self) -> int:
        return self._footprint

    @property
    def peak(self) -> int:
        return self._peak

    @property
    def live_count(self) -> int:
        return len(self._live)

    def __contains__(self, alloc_id: int) -> bool:
        return alloc_id in self._live

    def size_of(self, alloc_id: int) -> Optional[int]:
        """Return the recorded size of a live allocation, or None."""
        return self._live.get(alloc_id)

    def add(self, alloc_id: int, size: int) -> Optional[int]:
        """Record a live allocation.

        Re-adding a live id replaces its entry and the old size leaves the
        footprint.

        Returns:
            The replaced size, or None if alloc_id was not live
        """
        replaced = self._live.get(alloc_id)
        self._live[alloc_id] = size
        self._footprint += size - (replaced or 0)
        if self._footprint > self._peak:
            self._peak = self._footprint
        return replaced

    def remove(self, alloc_id: int) -> Optional[int]:
        """Drop a live allocation and return its size (None if unknown)."""
        size = self._live.pop(alloc_id, None)
        if size is not None:
            self._footprint -= size
        return size

    def rescan(self) -> int:
        """Recompute the footprint from the live table."""
        return sum(self._live.values())

    def live_ids(self) -> Iterable[int]:
        return self._live.keys()


class ViolationReason(Enum):
    """Why an event stream is invalid."""
    FREE_WITHOUT_ALLOC = "free_without_alloc"
    SIZE_MISMATCH = "size_mismatch"
    DUPLICATE_ALLOC = "duplicate_alloc"
    NON_POSITIVE_SIZE = "non_positive_size"
    TIMESTAMP_REGRESSION = "timestamp_regression"


@dataclass
class ValidationResult:
    """Result of validating an event stream.

    Attributes:
        ok: True if every event is consistent
        index: Index of the first offending event when not ok
        reason: Violation kind when not ok
        message: Human-readable description
    """
    ok: bool
    index: Optional[int] = None
    reason: Optional[ViolationReason] = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


class EventStreamValidator:
    """Streaming form of validate_event_stream.

    Feed events one at a time with ``check``; the embedded ledger holds
    the exact footprint after every accepted event.
    """

    def __init__(self) -> None:
        self.ledger = FootprintLedger()
        self._last_ts: Dict[int, int] = {}

    def check(self, index: int, event: AllocEvent) -> Optional[ValidationResult]:
        """Apply one event; return a failed ValidationResult if it is invalid."""
        previous = self._last_ts.get(event.thread)
        if previous is not None and event.timestamp < previous:
            return ValidationResult(
                ok=False,
                index=index,
                reason=ViolationReason.TIMESTAMP_REGRESSION,
                message=f"thread {event.thread} timestamp {event.timestamp} < {previous}",
            )
        self._last_ts[event.thread] = event.timestamp

        ledger = self.ledger
        if event.kind is EventKind.FREE:
            recorded = ledger.size_of(event.alloc_id)
            if recorded is None:
                return ValidationResult(
                    ok=False,
                    index=index,
                    reason=ViolationReason.FREE_WITHOUT_ALLOC,
                    message=f"free of id {event.alloc_id} without live alloc",
                )
            if recorded != event.size:
                return ValidationResult(
                    ok=False,
                    index=index,
                    reason=ViolationReason.SIZE_MISMATCH,
                    message=f"free of id {event.alloc_id} with {event.size}B, allocated {recorded}B",
                )
            ledger.remove(event.alloc_id)
            return None

        if event.size <= 0:
            return ValidationResult(
                ok=False,
                index=index,
                reason=ViolationReason.NON_POSITIVE_SIZE,
                message=f"{event.kind.value} of {event.size}B",
            )
        if event.kind is EventKind.ALLOC:
            if event.alloc_id in ledger:
                return ValidationResult(
                    ok=False,
                    index=index,
                    reason=ViolationReason.DUPLICATE_ALLOC,
                    message=f"alloc of live id {event.alloc_id}",
                )
            ledger.add(event.alloc_id, event.size)
        return None


def validate_event_stream(events: Iterable[AllocEvent]) -> ValidationResult:
    """Check that every free matches a live prior alloc with the same size.

    Also rejects zero-size allocs/copies, a second alloc of a live id and
    per-thread timestamp regressions.

    Args:
        events: Allocator events in emission order

    Returns:
        ValidationResult; ``ok`` is False at the first offending index
    """
    validator = EventStreamValidator()
    for index, event in enumerate(events):
        failure = validator.check(index, event)
        if failure is not None:
            return failure
    return ValidationResult(ok=True, message="ok")
