"""Sampling-based leak detection.

Piggybacks on threshold sampling: whenever a growth sample reaches a new
high-water mark, the detector settles the allocation it was tracking
(counting whether it was reclaimed) and starts tracking the allocation
that triggered the sample. Each callsite accumulates a (mallocs, frees)
leak score scored with the Rule of Succession.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence

from heapscope.core.models import MIB, Callsite, FootprintPoint, LeakEstimator, SampleKind, SampleRecord
from heapscope.errors import UndefinedSlopeError

logger = logging.getLogger(__name__)

REPORT_PROBABILITY = Fraction(95, 100)
REPORT_MIN_SLOPE = Fraction(1, 100)


@dataclass
class LeakScore:
    """Tracking history of one callsite.

    Attributes:
        mallocs: Tracking episodes started at this callsite
        frees: Tracked objects that were reclaimed
    """
    mallocs: int = 0
    frees: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.frees <= self.mallocs:
            raise ValueError(f"invalid leak score (mallocs={self.mallocs}, frees={self.frees})")


@dataclass
class TrackedAllocation:
    """The single allocation currently being watched for reclamation."""
    alloc_id: int
    callsite: Callsite
    tracked_since: int
    reclaimed: bool = False


@dataclass
class LeakReportEntry:
    """One reported leak.

    Attributes:
        callsite: Leaking allocation site
        probability: Leak probability in [0, 1]
        leak_rate: MB allocated per second at the callsite
        score: Underlying (mallocs, frees) history
    """
    callsite: Callsite
    probability: float
    leak_rate: float
    score: LeakScore


def _probability(score: LeakScore, estimator: LeakEstimator = LeakEstimator.PRINTED) -> Fraction:
    if estimator is LeakEstimator.LAPLACE:
        raw = 1 - Fraction(score.frees + 1, score.mallocs + 2)
    else:
        raw = 1 - Fraction(score.frees + 1, score.mallocs - score.frees + 2)
    return min(max(raw, Fraction(0)), Fraction(1))


def leak_probability(score: LeakScore, estimator: LeakEstimator = LeakEstimator.PRINTED) -> float:
    """Leak probability of a callsite, clamped to [0, 1].

    The default estimator evaluates ``1 - (frees + 1) / (mallocs - frees + 2)``,
    which goes negative once frees approach mallocs; the clamp keeps it a
    probability. ``LeakEstimator.LAPLACE`` gives the textbook
    ``1 - (frees + 1) / (mallocs + 2)``.
    """
    return float(_probability(score, estimator))


def _slope(trend: Sequence[FootprintPoint]) -> Fraction:
    if len(trend) < 2:
        raise UndefinedSlopeError(f"growth slope needs at least 2 trend points, got {len(trend)}")
    first, last = trend[0].footprint, trend[-1].footprint
    return Fraction(last - first, max(first, 1))


def growth_slope(trend: Sequence[FootprintPoint]) -> float:
    """Relative footprint growth across the trend window.

    Returns:
        ``(last - first) / max(first, 1)``

    Raises:
        UndefinedSlopeError: With fewer than two points
    """
    return float(_slope(trend))


def leak_rate(allocated_bytes: int, elapsed_seconds: float) -> float:
    """Bytes allocated at a callsite per elapsed second, in MB/s (MB = 2**20).

    Raises:
        ValueError: If elapsed_seconds <= 0
    """
    if elapsed_seconds <= 0:
        raise ValueError(f"elapsed time must be positive, got {elapsed_seconds}")
    return (allocated_bytes / MIB) / elapsed_seconds


def filter_leak_reports(
    scores: Mapping[Callsite, LeakScore],
    trend: Sequence[FootprintPoint],
    rates: Mapping[Callsite, float],
    estimator: LeakEstimator = LeakEstimator.PRINTED,
) -> List[LeakReportEntry]:
    """Select high-confidence leaks, highest leak rate first.

    Nothing is reported unless overall growth across the trend is at
    least 1%; then only callsites whose probability strictly exceeds 95%
    are kept.
    """
    try:
        if _slope(trend) < REPORT_MIN_SLOPE:
            return []
    except UndefinedSlopeError:
        return []

    entries: List[LeakReportEntry] = []
    for callsite, score in scores.items():
        probability = _probability(score, estimator)
        if probability <= REPORT_PROBABILITY:
            continue
        entries.append(LeakReportEntry(
            callsite=callsite,
            probability=float(probability),
            leak_rate=rates.get(callsite, 0.0),
            score=LeakScore(score.mallocs, score.frees),
        ))
    entries.sort(key=lambda e: (-e.leak_rate, e.callsite))
    return entries


class LeakDetector:
    """High-water-mark leak detector.

    ``on_free`` may be called from any thread: it reads one attribute and
    compares identities. Settling and retracking happen only in
    ``on_growth_sample``, which callers serialise with sample emission.
    """

    def __init__(self) -> None:
        self.scores: Dict[Callsite, LeakScore] = {}
        self.tracked: Optional[TrackedAllocation] = None
        self.high_water_mark = 0
        self.free_checks = 0
        self.tracking_episodes = 0
        self._tracked_id: Optional[int] = None

    def on_growth_sample(self, sample: SampleRecord) -> bool:
        """Settle and retrack when a growth sample sets a new high-water mark.

        Returns:
            True if a new tracking episode started
        """
        if sample.kind is not SampleKind.GROWTH or sample.footprint <= self.high_water_mark:
            return False
        self.high_water_mark = sample.footprint

        previous = self.tracked
        if previous is not None and previous.reclaimed:
            self.scores[previous.callsite].frees += 1

        if sample.alloc_id is None:
            self.tracked = None
            self._tracked_id = None
            return False
        self.tracked = TrackedAllocation(
            alloc_id=sample.alloc_id,
            callsite=sample.callsite,
            tracked_since=sample.timestamp,
        )
        self._tracked_id = sample.alloc_id
        self.scores.setdefault(sample.callsite, LeakScore()).mallocs += 1
        self.tracking_episodes += 1
        return True

    def on_free(self, alloc_id: int) -> bool:
        """Mark the tracked allocation reclaimed if alloc_id is it.

        Returns:
            True if this free reclaimed the tracked allocation
        """
        self.free_checks += 1
        if alloc_id != self._tracked_id:
            return False
        tracked = self.tracked
        self._tracked_id = None
        if tracked is None:
            return False
        tracked.reclaimed = True
        logger.debug(f"tracked allocation {alloc_id} at {tracked.callsite} reclaimed")
        return True

    def score_of(self, callsite: Callsite) -> LeakScore:
        return self.scores.get(callsite, LeakScore())

    def report(
        self,
        trend: Sequence[FootprintPoint],
        rates: Mapping[Callsite, float],
        estimator: LeakEstimator = LeakEstimator.PRINTED,
    ) -> List[LeakReportEntry]:
        """Filtered leak report over this detector's scores."""
        return filter_leak_reports(self.scores, trend, rates, estimator)
