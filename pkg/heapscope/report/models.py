"""Profile document model."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Dict, List, Optional

from heapscope.core.models import Callsite, FootprintPoint
from heapscope.cpu.attributor import NS_PER_SECOND, CpuCounters
from heapscope.leaks.detector import LeakReportEntry
from heapscope.storage.codec import quantize6

PROFILE_FORMAT_VERSION = "1"

ZERO = Decimal("0.000000")


def ns_to_seconds(ns: int) -> Decimal:
    """Nanoseconds as seconds, 6 decimal places."""
    return quantize6(Decimal(ns) / NS_PER_SECOND)


@dataclass
class CallsiteStats:
    """One report row.

    Attributes:
        callsite: Source attribution
        cpu: Managed and native CPU time (ns)
        alloc_bytes_sampled: Sum of growth-sample deltas
        peak_contribution: Highest cumulative sampled net contribution
        avg_footprint_share: Time-weighted mean of the cumulative net contribution
            over the trend window (sample-derived approximation)
        managed_alloc_fraction: Managed share of sampled allocated bytes
        copy_mbps: Estimated copy volume in MB/s
        leak: Leak report entry, if the callsite is reported as leaking
    """
    callsite: Callsite
    cpu: CpuCounters = field(default_factory=CpuCounters)
    alloc_bytes_sampled: int = 0
    peak_contribution: int = 0
    avg_footprint_share: Decimal = ZERO
    managed_alloc_fraction: Decimal = ZERO
    copy_mbps: Decimal = ZERO
    leak: Optional[LeakReportEntry] = None

    @property
    def managed_seconds(self) -> Decimal:
        return ns_to_seconds(self.cpu.managed_ns)

    @property
    def native_seconds(self) -> Decimal:
        return ns_to_seconds(self.cpu.native_ns)


@dataclass
class ProfileTotals:
    """Sums over all rows."""
    managed_ns: int = 0
    native_ns: int = 0
    alloc_bytes_sampled: int = 0
    copy_mbps: Decimal = ZERO

    @classmethod
    def of(cls, rows: List[CallsiteStats]) -> "ProfileTotals":
        return cls(
            managed_ns=sum(r.cpu.managed_ns for r in rows),
            native_ns=sum(r.cpu.native_ns for r in rows),
            alloc_bytes_sampled=sum(r.alloc_bytes_sampled for r in rows),
            copy_mbps=sum((r.copy_mbps for r in rows), ZERO),
        )


@dataclass
class ProfileDocument:
    """Aggregated profile of one run.

    Attributes:
        format_version: Profile format version
        config: Echo of the sample file header
        trend: Global footprint trend
        rows: Per-callsite statistics
        leaks: Filtered leak report, highest leak rate first
        totals: Sums over rows
        peak_footprint: Peak footprint of the run
        elapsed_ns: Run length
        sample_count: Growth, decline and copy records aggregated
        truncated: True if any input ended in a partial record
    """
    config: Dict[str, Any] = field(default_factory=dict)
    trend: List[FootprintPoint] = field(default_factory=list)
    rows: List[CallsiteStats] = field(default_factory=list)
    leaks: List[LeakReportEntry] = field(default_factory=list)
    totals: ProfileTotals = field(default_factory=ProfileTotals)
    peak_footprint: int = 0
    elapsed_ns: int = 0
    sample_count: int = 0
    truncated: bool = False
    format_version: str = PROFILE_FORMAT_VERSION

    def row(self, callsite: Callsite) -> Optional[CallsiteStats]:
        for row in self.rows:
            if row.callsite == callsite:
                return row
        return None
