"""Copy-volume tracking: rate-sampled bulk-copy bytes per callsite."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Optional

from heapscope.core.models import MIB, Callsite, SampleKind, SampleRecord

from .rate import RateSamplerState, RngLike, SampleMeta, init_countdown, record_bytes


@dataclass
class CopyStats:
    """Estimated copy bytes per callsite over a time window.

    Attributes:
        sampled_copy_bytes: samples x R_copy per callsite
        window_start: First observed copy (ns)
        window_end: Last observed copy (ns)
    """
    sampled_copy_bytes: Dict[Callsite, int] = field(default_factory=lambda: defaultdict(int))
    window_start: Optional[int] = None
    window_end: Optional[int] = None

    def observe(self, timestamp: int) -> None:
        if self.window_start is None or timestamp < self.window_start:
            self.window_start = timestamp
        if self.window_end is None or timestamp > self.window_end:
            self.window_end = timestamp

    @property
    def window_ns(self) -> int:
        if self.window_start is None or self.window_end is None:
            return 0
        return self.window_end - self.window_start


class CopyVolumeTracker:
    """Feeds copy sizes into a rate sampler with R_copy bytes per sample.

    Copies never touch the threshold sampler's counters: they move bytes
    without changing the footprint.
    """

    def __init__(self, rate_bytes: int, rng: RngLike = None) -> None:
        self.rate_bytes = rate_bytes
        self.sampler: RateSamplerState = init_countdown(rate_bytes, rng)
        self.stats = CopyStats()

    def record_copy(
        self,
        n: int,
        callsite: Callsite,
        timestamp: int,
        footprint: int = 0,
        peak_footprint: int = 0,
        managed: bool = False,
    ) -> Optional[SampleRecord]:
        """Account one copy of n bytes.

        Returns:
            A copy SampleRecord crediting ``triggers x R_copy`` bytes, or None
        """
        emitted = self.note_copy(n, timestamp, SampleMeta(callsite, timestamp))
        if not emitted:
            return None
        return self.credit(emitted, callsite, timestamp, footprint, peak_footprint, managed)

    def note_copy(self, n: int, timestamp: int, meta: Optional[SampleMeta] = None) -> int:
        """Feed n bytes to the rate sampler; return the number of triggers."""
        self.stats.observe(timestamp)
        return record_bytes(self.sampler, n, meta)

    def credit(
        self,
        emitted: int,
        callsite: Callsite,
        timestamp: int,
        footprint: int = 0,
        peak_footprint: int = 0,
        managed: bool = False,
    ) -> SampleRecord:
        """Credit ``emitted x R_copy`` bytes to a callsite as one copy record."""
        credited = emitted * self.rate_bytes
        self.stats.sampled_copy_bytes[callsite] += credited
        return SampleRecord(
            kind=SampleKind.COPY,
            timestamp=timestamp,
            net_delta=credited,
            footprint=footprint,
            peak_footprint=max(footprint, peak_footprint),
            managed_fraction=1.0 if managed else 0.0,
            callsite=callsite,
            alloc_id=None,
        )

    def estimated_total_bytes(self) -> int:
        return sum(self.stats.sampled_copy_bytes.values())


def copy_mbps(stats: CopyStats, callsite: Callsite, window_ns: Optional[int] = None) -> float:
    """Estimated copy rate of a callsite in MB/s (MB = 2**20 bytes).

    Args:
        stats: Accumulated copy statistics
        callsite: Callsite to report
        window_ns: Override of the window duration; defaults to the stats window

    Raises:
        ValueError: If the window duration is zero
    """
    duration = stats.window_ns if window_ns is None else window_ns
    if duration <= 0:
        raise ValueError("copy window has zero duration")
    estimated = stats.sampled_copy_bytes.get(callsite, 0)
    return (estimated / MIB) / (duration / 1e9)
