"""Property-based tests for leak scoring and reporting."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from heapscope.core import Callsite, FootprintPoint, LeakEstimator, SampleKind, SampleRecord
from heapscope.errors import UndefinedSlopeError
from heapscope.leaks import (
    LeakDetector,
    LeakScore,
    filter_leak_reports,
    growth_slope,
    leak_probability,
    leak_rate,
)

SITE_A = Callsite("leak.py", 10)
SITE_B = Callsite("other.py", 5)

GROWING = [FootprintPoint(0, 100), FootprintPoint(1, 200)]


def growth(footprint: int, alloc_id, site: Callsite = SITE_A, ts: int = 0) -> SampleRecord:
    return SampleRecord(SampleKind.GROWTH, ts, footprint, footprint, footprint, 0.0, site, alloc_id)


@pytest.mark.parametrize(
    "mallocs,frees,estimator,expected",
    [
        (19, 0, LeakEstimator.PRINTED, 1 - 1 / 21),
        (18, 0, LeakEstimator.PRINTED, 0.95),
        (10, 5, LeakEstimator.PRINTED, 1 - 6 / 7),
        (10, 10, LeakEstimator.PRINTED, 0.0),
        (10, 5, LeakEstimator.LAPLACE, 0.5),
        (0, 0, LeakEstimator.LAPLACE, 0.5),
    ],
)
def test_leak_probability_values(mallocs, frees, estimator, expected):
    assert leak_probability(LeakScore(mallocs, frees), estimator) == pytest.approx(expected)


def test_invalid_score_rejected():
    with pytest.raises(ValueError):
        LeakScore(1, 2)


@given(mallocs=st.integers(min_value=0, max_value=500), data=st.data(), estimator=st.sampled_from(list(LeakEstimator)))
@settings(max_examples=200)
def test_probability_is_clamped(mallocs, data, estimator):
    """
    **Property: leak probability always lies in [0, 1]**
    """
    frees = data.draw(st.integers(min_value=0, max_value=mallocs))
    assert 0.0 <= leak_probability(LeakScore(mallocs, frees), estimator) <= 1.0


def test_growth_slope():
    assert growth_slope(GROWING) == pytest.approx(1.0)
    assert growth_slope([FootprintPoint(0, 0), FootprintPoint(1, 50)]) == 50.0
    with pytest.raises(UndefinedSlopeError):
        growth_slope([FootprintPoint(0, 1)])


def test_leak_rate():
    assert leak_rate(2 * 2**20, 4.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        leak_rate(1, 0)


def test_report_threshold_is_strict():
    scores = {SITE_A: LeakScore(19, 0), SITE_B: LeakScore(18, 0)}
    report = filter_leak_reports(scores, GROWING, {SITE_A: 1.5})
    assert [e.callsite for e in report] == [SITE_A]
    assert report[0].leak_rate == 1.5
    assert report[0].score == LeakScore(19, 0)


def test_flat_trend_suppresses_report():
    scores = {SITE_A: LeakScore(50, 0)}
    assert filter_leak_reports(scores, [FootprintPoint(0, 100), FootprintPoint(1, 100)], {}) == []
    assert filter_leak_reports(scores, [FootprintPoint(0, 100)], {}) == []
    assert filter_leak_reports(scores, [], {}) == []
    # Exactly 1% growth is enough.
    assert len(filter_leak_reports(scores, [FootprintPoint(0, 100), FootprintPoint(1, 101)], {})) == 1


def test_report_sorted_by_rate():
    scores = {SITE_A: LeakScore(40, 0), SITE_B: LeakScore(40, 0)}
    report = filter_leak_reports(scores, GROWING, {SITE_A: 1.0, SITE_B: 3.0})
    assert [e.callsite for e in report] == [SITE_B, SITE_A]


def test_detector_tracks_on_new_high_water_mark():
    detector = LeakDetector()
    assert detector.on_growth_sample(growth(100, 1))
    assert detector.tracked.alloc_id == 1
    assert detector.score_of(SITE_A) == LeakScore(1, 0)
    # Below the high-water mark: no retrack.
    assert not detector.on_growth_sample(growth(90, 2))
    assert detector.tracked.alloc_id == 1


def test_reclaimed_tracked_object_counts_a_free():
    detector = LeakDetector()
    detector.on_growth_sample(growth(100, 1))
    assert not detector.on_free(7)
    assert detector.on_free(1)
    assert not detector.on_free(1)
    detector.on_growth_sample(growth(200, 2))
    assert detector.score_of(SITE_A) == LeakScore(2, 1)
    assert detector.free_checks == 3
    assert detector.tracking_episodes == 2


def test_unreclaimed_object_counts_no_free():
    detector = LeakDetector()
    detector.on_growth_sample(growth(100, 1))
    detector.on_growth_sample(growth(200, 2, SITE_B))
    assert detector.score_of(SITE_A) == LeakScore(1, 0)
    assert detector.score_of(SITE_B) == LeakScore(1, 0)


def test_decline_and_copy_samples_ignored():
    detector = LeakDetector()
    decline = SampleRecord(SampleKind.DECLINE, 0, -50, 500, 600, 0.0, SITE_A, 3)
    assert not detector.on_growth_sample(decline)
    assert detector.tracked is None
    assert detector.high_water_mark == 0


def test_sample_without_alloc_id_clears_tracking():
    detector = LeakDetector()
    detector.on_growth_sample(growth(100, 1))
    assert not detector.on_growth_sample(growth(200, None))
    assert detector.tracked is None
    assert detector.high_water_mark == 200


def test_nineteen_leaky_episodes_are_reported():
    detector = LeakDetector()
    for k in range(1, 20):
        detector.on_growth_sample(growth(100 * k, k, ts=k))
    report = detector.report(GROWING, {SITE_A: 2.0})
    assert len(report) == 1
    assert report[0].probability == pytest.approx(1 - 1 / 21)


@given(ops=st.lists(st.tuples(st.booleans(), st.integers(min_value=1, max_value=20), st.sampled_from([SITE_A, SITE_B])), max_size=80))
@settings(max_examples=100)
def test_scores_stay_consistent(ops):
    """
    **Property: frees <= mallocs per site and mallocs sum to tracking episodes**
    """
    detector = LeakDetector()
    footprint = 0
    for next_id, (is_growth, amount, site) in enumerate(ops, start=1):
        if is_growth:
            footprint += amount
            detector.on_growth_sample(growth(footprint, next_id, site, next_id))
        else:
            detector.on_free(amount)
        for score in detector.scores.values():
            assert 0 <= score.frees <= score.mallocs
    assert sum(s.mallocs for s in detector.scores.values()) == detector.tracking_episodes


@pytest.mark.parametrize("estimator", list(LeakEstimator))
def test_probability_grid(estimator):
    """Exhaustive 0 <= frees <= mallocs <= 100: bounded, monotone, and (m, m) scores zero."""
    for mallocs in range(101):
        for frees in range(mallocs + 1):
            p = leak_probability(LeakScore(mallocs, frees), estimator)
            assert 0.0 <= p <= 1.0
            if mallocs < 100:
                assert leak_probability(LeakScore(mallocs + 1, frees), estimator) >= p
            if frees < mallocs:
                assert leak_probability(LeakScore(mallocs, frees + 1), estimator) <= p
        if estimator is LeakEstimator.PRINTED and mallocs:
            assert leak_probability(LeakScore(mallocs, mallocs), estimator) == 0.0
