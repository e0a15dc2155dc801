"""Aggregation of sample files and timer logs into a ProfileDocument."""

from __future__ import annotations

import logging
from collections import defaultdict
from decimal import Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from heapscope.core.models import Callsite, FootprintPoint, LeakEstimator, SampleKind, SampleRecord
from heapscope.cpu.attributor import NS_PER_SECOND, CpuAttributor, CpuCounters
from heapscope.leaks.detector import LeakDetector, LeakReportEntry, leak_rate
from heapscope.sampling.copy_volume import CopyStats, copy_mbps
from heapscope.storage.codec import quantize6
from heapscope.storage.samplefile import SampleFile, format_record, read_sample_file
from heapscope.storage.timerlog import read_timer_log

from .models import ZERO, CallsiteStats, ProfileDocument, ProfileTotals
from .render import sort_rows

logger = logging.getLogger(__name__)


class _SiteAccumulator:
    """Running memory figures of one callsite."""

    __slots__ = ("alloc_bytes", "managed_bytes", "net", "peak", "steps")

    def __init__(self) -> None:
        self.alloc_bytes = 0
        self.managed_bytes = Decimal(0)
        self.net = 0
        self.peak = 0
        self.steps: List[tuple] = []

    def apply(self, record: SampleRecord) -> None:
        if record.kind is SampleKind.GROWTH:
            self.alloc_bytes += record.net_delta
            self.managed_bytes += quantize6(record.managed_fraction) * record.net_delta
        self.net += record.net_delta
        self.peak = max(self.peak, self.net)
        self.steps.append((record.timestamp, self.net))

    def average(self, start: int, end: int) -> Decimal:
        """Time-weighted mean of the clamped cumulative net over [start, end]."""
        if not self.steps:
            return ZERO
        if end <= start:
            return quantize6(max(self.steps[-1][1], 0))
        area = 0
        value = 0
        cursor = start
        for timestamp, net in self.steps:
            area += value * (timestamp - cursor)
            cursor, value = timestamp, max(net, 0)
        area += value * (end - cursor)
        return quantize6(Decimal(area) / Decimal(end - start))

    def managed_fraction(self) -> Decimal:
        if self.alloc_bytes <= 0:
            return ZERO
        return quantize6(min(self.managed_bytes / self.alloc_bytes, Decimal(1)))


def _merge(files: Sequence[SampleFile]) -> List[SampleRecord]:
    """All records by timestamp, keeping each file's emission order on ties.

    Files are ranked by content, so the order they are given in does not
    matter even when timestamps tie across files.
    """
    ranked = sorted(files, key=lambda f: (f.header.start_ns or 0, [format_record(r) for r in f.records]))
    keyed = [
        (r.timestamp, rank, index, r)
        for rank, f in enumerate(ranked)
        for index, r in enumerate(f.records)
    ]
    keyed.sort(key=lambda item: item[:3])
    return [item[3] for item in keyed]


def _trend(records: Iterable[SampleRecord]) -> List[FootprintPoint]:
    trend: List[FootprintPoint] = []
    for r in records:
        if r.kind not in (SampleKind.GROWTH, SampleKind.DECLINE):
            continue
        timestamp = r.timestamp
        if trend and timestamp <= trend[-1].timestamp:
            timestamp = trend[-1].timestamp + 1
        trend.append(FootprintPoint(timestamp, r.footprint))
    return trend


def _replay_leaks(records: Iterable[SampleRecord], trend: List[FootprintPoint], rates: Dict[Callsite, float],
                  estimator: LeakEstimator) -> List[LeakReportEntry]:
    detector = LeakDetector()
    for r in records:
        if r.kind is SampleKind.GROWTH:
            detector.on_growth_sample(r)
        elif r.kind is SampleKind.RECLAIM and r.alloc_id is not None:
            detector.on_free(r.alloc_id)
    entries = detector.report(trend, rates, estimator)
    for e in entries:
        e.probability = float(quantize6(e.probability))
        e.leak_rate = float(quantize6(e.leak_rate))
    return entries


def aggregate(
    paths: Sequence[str | Path],
    timer_log: Optional[str | Path] = None,
    estimator: LeakEstimator = LeakEstimator.PRINTED,
    sort_key: str = "peak_mem",
) -> ProfileDocument:
    """Build a profile from sample files of one run and an optional timer log.

    Files are merged by timestamp, so their order does not matter.

    Raises:
        SampleFileError: On a malformed line (names file:line)
        FormatVersionError: On a format version mismatch
        ValueError: On an unknown sort key
    """
    files = [read_sample_file(p) for p in paths]
    if not files:
        raise ValueError("no sample files given")
    header = files[0].header
    for f in files[1:]:
        if f.header.threshold != header.threshold:
            logger.warning(f"{f.path}: threshold {f.header.threshold} differs from {header.threshold}")
    truncated = any(f.truncated for f in files)
    if truncated:
        logger.warning("Some sample files ended in a partial record; aggregating complete records only")

    records = _merge(files)
    trend = _trend(records)

    sites: Dict[Callsite, _SiteAccumulator] = defaultdict(_SiteAccumulator)
    copies = CopyStats()
    sample_count = 0
    peak = max((f.footer.peak for f in files if f.footer is not None), default=0)
    for r in records:
        peak = max(peak, r.peak_footprint)
        if r.kind is SampleKind.RECLAIM:
            continue
        sample_count += 1
        if r.kind is SampleKind.COPY:
            copies.sampled_copy_bytes[r.callsite] += r.net_delta
            copies.observe(r.timestamp)
            sites.setdefault(r.callsite, _SiteAccumulator())
        else:
            sites[r.callsite].apply(r)

    elapsed_ns = max((f.footer.elapsed_ns for f in files if f.footer is not None), default=0)
    if elapsed_ns == 0 and records:
        start = header.start_ns or records[0].timestamp
        elapsed_ns = max(records[-1].timestamp - start, 0)

    cpu: Dict[Callsite, CpuCounters] = {}
    if timer_log is not None:
        cpu = CpuAttributor().replay(read_timer_log(timer_log))

    rates: Dict[Callsite, float] = {}
    if elapsed_ns > 0:
        rates = {site: leak_rate(acc.alloc_bytes, elapsed_ns / NS_PER_SECOND) for site, acc in sites.items()}
    leaks = _replay_leaks(records, trend, rates, estimator)
    leak_by_site = {e.callsite: e for e in leaks}

    window_start = trend[0].timestamp if trend else 0
    window_end = trend[-1].timestamp if trend else 0
    rows: List[CallsiteStats] = []
    for site in sorted(set(sites) | set(cpu)):
        acc = sites.get(site, _SiteAccumulator())
        mbps = ZERO
        if copies.sampled_copy_bytes.get(site):
            try:
                mbps = quantize6(copy_mbps(copies, site, elapsed_ns or None))
            except ValueError:
                logger.warning(f"{site}: copy window has zero duration; reporting 0 MB/s")
        rows.append(CallsiteStats(
            callsite=site,
            cpu=cpu.get(site, CpuCounters()),
            alloc_bytes_sampled=acc.alloc_bytes,
            peak_contribution=acc.peak,
            avg_footprint_share=acc.average(window_start, window_end),
            managed_alloc_fraction=acc.managed_fraction(),
            copy_mbps=mbps,
            leak=leak_by_site.get(site),
        ))

    rows = sort_rows(rows, sort_key)
    logger.info(f"Aggregated {sample_count} samples from {len(files)} file(s) into {len(rows)} rows")
    return ProfileDocument(
        config={
            "threshold": header.threshold,
            "copy_rate": header.copy_rate,
            "quantum_ns": header.quantum_ns,
            "seed": header.seed,
            "leak_estimator": estimator.value,
        },
        trend=trend,
        rows=rows,
        leaks=leaks,
        totals=ProfileTotals.of(rows),
        peak_footprint=peak,
        elapsed_ns=elapsed_ns,
        sample_count=sample_count,
        truncated=truncated,
    )
