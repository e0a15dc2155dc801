"""Threshold-based allocation sampling.

The sampler keeps a count of bytes allocated (A) and freed (F) since the
last sample. Once ``|A - F| >= T`` it emits one sample and resets the
counters, so short-lived churn that leaves the footprint unchanged never
produces samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from heapscope.core.models import (
    AllocEvent,
    Callsite,
    DomainTag,
    EventKind,
    FootprintPoint,
    SampleKind,
    SampleRecord,
    next_prime,
)


def choose_sampling_threshold(base: int) -> int:
    """Return the smallest prime >= base.

    A prime threshold avoids stride effects between allocation sizes
    and the sampling period.

    Raises:
        ValueError: If base < 2
    """
    return next_prime(base)


@dataclass
class ThresholdSamplerState:
    """Counters of the threshold sampler.

    Attributes:
        threshold: Prime threshold T in bytes
        allocated_since_reset: A
        freed_since_reset: F
        footprint: Live bytes
        peak_footprint: Highest footprint observed
        managed_bytes_since_reset: Managed-domain share of A
        trend: One FootprintPoint per emitted sample
    """
    threshold: int
    allocated_since_reset: int = 0
    freed_since_reset: int = 0
    footprint: int = 0
    peak_footprint: int = 0
    managed_bytes_since_reset: int = 0
    trend: List[FootprintPoint] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ValueError(f"threshold must be positive, got {self.threshold}")

    @property
    def net(self) -> int:
        return self.allocated_since_reset - self.freed_since_reset


class ThresholdSampler:
    """Threshold-based sampler over alloc/free events.

    Not synchronised: the live shim serialises calls, replay is
    single-threaded.
    """

    def __init__(self, threshold: int) -> None:
        self.state = ThresholdSamplerState(threshold=threshold)
        self.samples_emitted = 0

    @classmethod
    def from_state(cls, state: ThresholdSamplerState) -> "ThresholdSampler":
        """Wrap an existing state without copying it."""
        sampler = cls(state.threshold)
        sampler.state = state
        sampler.samples_emitted = len(state.trend)
        return sampler

    @property
    def threshold(self) -> int:
        return self.state.threshold

    def note_alloc(self, size: int, managed: bool) -> bool:
        """Apply an allocation; return True if the threshold was crossed."""
        s = self.state
        s.footprint += size
        if s.footprint > s.peak_footprint:
            s.peak_footprint = s.footprint
        s.allocated_since_reset += size
        if managed:
            s.managed_bytes_since_reset += size
        return abs(s.allocated_since_reset - s.freed_since_reset) >= s.threshold

    def note_free(self, size: int) -> bool:
        """Apply a free; return True if the threshold was crossed."""
        s = self.state
        s.footprint -= size
        s.freed_since_reset += size
        return abs(s.allocated_since_reset - s.freed_since_reset) >= s.threshold

    def emit(self, callsite: Callsite, alloc_id: Optional[int], timestamp: int) -> SampleRecord:
        """Build the sample for the current crossing and reset the counters."""
        s = self.state
        net = s.allocated_since_reset - s.freed_since_reset
        managed_fraction = s.managed_bytes_since_reset / max(s.allocated_since_reset, 1)
        record = SampleRecord(
            kind=SampleKind.GROWTH if net > 0 else SampleKind.DECLINE,
            timestamp=timestamp,
            net_delta=net,
            footprint=s.footprint,
            peak_footprint=s.peak_footprint,
            managed_fraction=min(managed_fraction, 1.0),
            callsite=callsite,
            alloc_id=alloc_id,
        )
        # Trend timestamps must strictly increase even if the clock ties.
        if s.trend and timestamp <= s.trend[-1].timestamp:
            timestamp = s.trend[-1].timestamp + 1
        s.trend.append(FootprintPoint(timestamp=timestamp, footprint=s.footprint))
        s.allocated_since_reset = 0
        s.freed_since_reset = 0
        s.managed_bytes_since_reset = 0
        self.samples_emitted += 1
        return record

    def record_event(self, event: AllocEvent) -> Optional[SampleRecord]:
        """Apply one alloc or free and return a sample on threshold crossing.

        Args:
            event: Validated alloc or free event

        Returns:
            The emitted SampleRecord, or None

        Raises:
            ValueError: For copy events, which belong to the copy-volume sampler
        """
        if event.kind is EventKind.ALLOC:
            crossed = self.note_alloc(event.size, event.domain is DomainTag.MANAGED)
        elif event.kind is EventKind.FREE:
            crossed = self.note_free(event.size)
        else:
            raise ValueError("copy events are not accepted by the threshold sampler")
        if not crossed:
            return None
        return self.emit(event.callsite, event.alloc_id, event.timestamp)

    def trend_series(self) -> List[FootprintPoint]:
        """Footprint trend in emission order, one point per sample."""
        return list(self.state.trend)


def record_event(state: ThresholdSamplerState, event: AllocEvent) -> Optional[SampleRecord]:
    """Functional form of ThresholdSampler.record_event over a bare state."""
    return ThresholdSampler.from_state(state).record_event(event)


def trend_series(state: ThresholdSamplerState) -> List[FootprintPoint]:
    """Footprint trend of a bare state, in emission order."""
    return list(state.trend)
