"""Deterministic replay of allocation traces.

Runs an exact footprint oracle, the threshold sampler and a rate
sampler with R = T side by side over one event stream, and feeds the
threshold samples through the leak detector.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import numpy as np

from heapscope.core.models import (
    Callsite,
    DomainTag,
    EventKind,
    FootprintPoint,
    ProfilerConfig,
    SampleKind,
    SampleRecord,
)
from heapscope.core.validation import EventStreamValidator
from heapscope.cpu.attributor import NS_PER_SECOND
from heapscope.errors import InvalidTraceError
from heapscope.leaks.detector import LeakDetector, LeakReportEntry, LeakScore, leak_rate
from heapscope.sampling.copy_volume import CopyVolumeTracker
from heapscope.sampling.rate import RateSampler
from heapscope.sampling.threshold import ThresholdSampler
from heapscope.storage.codec import fixed6
from heapscope.storage.samplefile import SampleFileFooter, SampleFileHeader, format_record, render_sample_file

logger = logging.getLogger(__name__)


@dataclass
class ReplayResult:
    """Outcome of one replay.

    Attributes:
        config: Configuration the replay ran with
        event_count: Events replayed
        true_footprint: Exact footprint after every event (oracle)
        oracle_consistent: Incremental ledger agreed with the cumulative-sum oracle at every event
        threshold_records: Threshold sampler output in emission order
        rate_records: One record per rate sample (R = T, alloc and free bytes)
        copy_records: Copy-volume records
        max_reconstruction_error: max |true - step reconstruction| over event boundaries
        peak_footprint: Peak reported by the threshold sampler
        trend: Footprint trend of the threshold sampler
        leak_scores: Leak detector scores by callsite
        leak_report: Filtered leak report
        elapsed_ns: Synthetic run length (event_count x tick)
    """
    config: ProfilerConfig
    event_count: int
    true_footprint: np.ndarray
    oracle_consistent: bool
    threshold_records: List[SampleRecord] = field(default_factory=list)
    rate_records: List[SampleRecord] = field(default_factory=list)
    copy_records: List[SampleRecord] = field(default_factory=list)
    max_reconstruction_error: int = 0
    peak_footprint: int = 0
    trend: List[FootprintPoint] = field(default_factory=list)
    leak_scores: Dict[Callsite, LeakScore] = field(default_factory=dict)
    leak_report: List[LeakReportEntry] = field(default_factory=list)
    elapsed_ns: int = 0

    @property
    def threshold_samples(self) -> int:
        return len(self.threshold_records)

    @property
    def rate_samples(self) -> int:
        return len(self.rate_records)

    @property
    def oracle_peak(self) -> int:
        return int(self.true_footprint.max()) if self.event_count else 0

    @property
    def sample_ratio(self) -> float:
        """Rate samples per threshold sample."""
        return self.rate_samples / max(self.threshold_samples, 1)

    @property
    def true_footprint_series(self) -> List[FootprintPoint]:
        tick = self.config.tick_ns
        return [FootprintPoint(i * tick, int(fp)) for i, fp in enumerate(self.true_footprint)]

    def to_json(self) -> str:
        """Byte-stable serialisation of the result."""
        payload = {
            "threshold": self.config.threshold_bytes,
            "seed": self.config.deterministic_rng_seed,
            "events": self.event_count,
            "threshold_samples": self.threshold_samples,
            "rate_samples": self.rate_samples,
            "copy_samples": len(self.copy_records),
            "max_reconstruction_error": self.max_reconstruction_error,
            "peak_footprint": self.peak_footprint,
            "oracle_peak": self.oracle_peak,
            "final_footprint": int(self.true_footprint[-1]) if self.event_count else 0,
            "elapsed_ns": self.elapsed_ns,
            "trend": [[p.timestamp, p.footprint] for p in self.trend],
            "records": [format_record(r).rstrip("\n") for r in self.threshold_records],
            "leaks": [
                {
                    "file": e.callsite.file,
                    "line": e.callsite.line,
                    "probability": fixed6(e.probability),
                    "leak_rate_mbps": fixed6(e.leak_rate),
                    "mallocs": e.score.mallocs,
                    "frees": e.score.frees,
                }
                for e in self.leak_report
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _rate_record(kind: SampleKind, event, timestamp: int, footprint: int, peak: int) -> SampleRecord:
    return SampleRecord(
        kind=kind,
        timestamp=timestamp,
        net_delta=event.size if kind is SampleKind.GROWTH else -event.size,
        footprint=footprint,
        peak_footprint=peak,
        managed_fraction=1.0 if event.domain is DomainTag.MANAGED else 0.0,
        callsite=event.callsite,
        alloc_id=event.alloc_id,
    )


def replay(trace: Iterable, config: ProfilerConfig) -> ReplayResult:
    """Replay a trace through the oracle and both samplers.

    Timestamps are synthetic: event i happens at ``i * config.tick_ns``.

    Raises:
        InvalidTraceError: At the first invalid event, naming its index
    """
    tick = config.tick_ns
    threshold = config.threshold_bytes
    validator = EventStreamValidator()
    ledger = validator.ledger
    sampler = ThresholdSampler(threshold)
    rate = RateSampler(threshold, config.deterministic_rng_seed)
    copies = CopyVolumeTracker(config.copy_rate_bytes, config.deterministic_rng_seed)
    detector = LeakDetector()

    deltas: List[int] = []
    incremental: List[int] = []
    sample_at: List[int] = []
    threshold_records: List[SampleRecord] = []
    rate_records: List[SampleRecord] = []
    copy_records: List[SampleRecord] = []
    allocated_by_site: Dict[Callsite, int] = defaultdict(int)

    index = -1
    for index, event in enumerate(trace):
        failure = validator.check(index, event)
        if failure is not None:
            raise InvalidTraceError(f"{failure.reason.value}: {failure.message}", index)
        now = index * tick
        kind = event.kind

        if kind is EventKind.COPY:
            deltas.append(0)
            incremental.append(ledger.footprint)
            state = sampler.state
            record = copies.record_copy(
                event.size, event.callsite, now, max(state.footprint, 0), state.peak_footprint,
                event.domain is DomainTag.MANAGED,
            )
            if record is not None:
                copy_records.append(record)
            continue

        if kind is EventKind.ALLOC:
            deltas.append(event.size)
            allocated_by_site[event.callsite] += event.size
            crossed = sampler.note_alloc(event.size, event.domain is DomainTag.MANAGED)
        else:
            deltas.append(-event.size)
            detector.on_free(event.alloc_id)
            crossed = sampler.note_free(event.size)
        incremental.append(ledger.footprint)

        if crossed:
            record = sampler.emit(event.callsite, event.alloc_id, now)
            threshold_records.append(record)
            sample_at.append(index)
            detector.on_growth_sample(record)

        emitted = rate.record_bytes(event.size)
        if emitted:
            rate_kind = SampleKind.GROWTH if kind is EventKind.ALLOC else SampleKind.DECLINE
            peak = max(ledger.peak, ledger.footprint)
            rate_records.extend(
                _rate_record(rate_kind, event, now, ledger.footprint, peak) for _ in range(emitted)
            )

    count = index + 1
    true_footprint = np.cumsum(np.asarray(deltas, dtype=np.int64)) if count else np.zeros(0, dtype=np.int64)
    consistent = bool(np.array_equal(true_footprint, np.asarray(incremental, dtype=np.int64)))
    if not consistent:
        logger.error("Footprint oracle disagrees with incremental ledger")

    max_error = 0
    if count:
        sample_idx = np.asarray(sample_at, dtype=np.int64)
        sample_fp = np.asarray([r.footprint for r in threshold_records], dtype=np.int64)
        latest = np.searchsorted(sample_idx, np.arange(count), side="right") - 1
        step = np.where(latest >= 0, sample_fp[np.maximum(latest, 0)] if len(sample_fp) else 0, 0)
        max_error = int(np.abs(true_footprint - step).max())

    elapsed_ns = count * tick
    trend = sampler.trend_series()
    rates: Dict[Callsite, float] = {}
    if elapsed_ns > 0:
        rates = {site: leak_rate(nbytes, elapsed_ns / NS_PER_SECOND) for site, nbytes in allocated_by_site.items()}
    report = detector.report(trend, rates, config.leak_estimator)

    logger.debug(
        f"Replayed {count} events: {len(threshold_records)} threshold samples, "
        f"{len(rate_records)} rate samples, max error {max_error}"
    )
    return ReplayResult(
        config=config,
        event_count=count,
        true_footprint=true_footprint,
        oracle_consistent=consistent,
        threshold_records=threshold_records,
        rate_records=rate_records,
        copy_records=copy_records,
        max_reconstruction_error=max_error,
        peak_footprint=sampler.state.peak_footprint,
        trend=trend,
        leak_scores={site: LeakScore(s.mallocs, s.frees) for site, s in detector.scores.items()},
        leak_report=report,
        elapsed_ns=elapsed_ns,
    )


def _header(config: ProfilerConfig) -> SampleFileHeader:
    return SampleFileHeader(
        threshold=config.threshold_bytes,
        copy_rate=config.copy_rate_bytes,
        quantum_ns=config.quantum_ns,
        seed=config.deterministic_rng_seed,
    )


def render_logs(result: ReplayResult) -> Tuple[str, str]:
    """Sample files the threshold and the rate sampler would have written."""
    header = _header(result.config)

    def footer(samples: int, peak: int) -> SampleFileFooter:
        return SampleFileFooter(
            events=result.event_count,
            samples=samples,
            peak=peak,
            elapsed_ns=result.elapsed_ns,
        )

    threshold_records = sorted(result.threshold_records + result.copy_records, key=lambda r: r.timestamp)
    rate_records = sorted(result.rate_records + result.copy_records, key=lambda r: r.timestamp)
    return (
        render_sample_file(header, threshold_records, footer(len(threshold_records), result.peak_footprint)),
        render_sample_file(header, rate_records, footer(len(rate_records), result.oracle_peak)),
    )


def compare_log_sizes(trace: Iterable, config: ProfilerConfig) -> Tuple[int, int]:
    """Serialised byte sizes of (threshold log, rate log) for one trace."""
    threshold_log, rate_log = render_logs(replay(trace, config))
    return len(threshold_log.encode("utf-8")), len(rate_log.encode("utf-8"))
