"""Property-based tests for trace generation and replay."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from heapscope.core import AllocEvent, DomainTag, EventKind, ProfilerConfig, SampleKind
from heapscope.errors import InvalidTraceError
from heapscope.replay import (
    TraceGenerator,
    TraceSpec,
    compare_log_sizes,
    generate_trace,
    iter_trace_spec,
    render_logs,
    replay,
)
from heapscope.replay.generators import CHURN_SITE, LEAK_SITE, STAIR_SITE
from heapscope.storage import parse_sample_text, read_trace, write_trace

from conftest import MIB_THRESHOLD, SMALL_THRESHOLD


def config(threshold: int = SMALL_THRESHOLD, **kwargs) -> ProfilerConfig:
    return ProfilerConfig(threshold_bytes=threshold, **kwargs)


def test_parse_trace_spec():
    spec = TraceSpec.parse("churn:pairs=10, drift=5")
    assert spec.generator is TraceGenerator.CHURN
    assert spec.params == {"pairs": 10, "drift": 5}
    assert TraceSpec.parse("leak:leak_fraction=0.5").params == {"leak_fraction": 0.5}
    assert TraceSpec.parse("STAIRCASE").resolved(1009)["size"] == 1009


@pytest.mark.parametrize(
    "text",
    ["heap:n=1", "churn:pairs", "churn:bogus=1", "leak:leak_fraction=1.5", "churn:pairs=-1", "churn:size=0"],
)
def test_parse_trace_spec_errors(text):
    with pytest.raises(ValueError):
        TraceSpec.parse(text)


def test_generated_traces_are_valid_and_repeatable(tmp_path):
    for generator in TraceGenerator:
        spec = TraceSpec(generator)
        events = generate_trace(spec, SMALL_THRESHOLD)
        assert events == list(iter_trace_spec(spec, SMALL_THRESHOLD))
        path = tmp_path / f"{generator.value}.trace"
        write_trace(path, events)
        assert read_trace(path) == events
        assert replay(events, config()).oracle_consistent


def test_churn_is_invisible_to_threshold_sampling():
    result = replay(generate_trace(TraceSpec.parse("churn:pairs=1000,size=100")), config())
    assert result.threshold_samples == 0
    assert result.trend == []
    assert result.rate_samples == (1000 * 200) // SMALL_THRESHOLD
    assert result.max_reconstruction_error == 100
    assert result.oracle_peak == 100


def test_churn_with_drift():
    trace = generate_trace(TraceSpec.parse("churn:pairs=1000,size=100,drift=101,drift_every=10"))
    result = replay(trace, config())
    assert 1 <= result.threshold_samples <= 11
    assert result.sample_ratio >= 10
    assert result.max_reconstruction_error < SMALL_THRESHOLD
    assert int(result.true_footprint[-1]) == 100 * 101


@pytest.mark.slow
def test_million_pair_churn_log_sizes():
    """16 KiB churn with 1 KiB drift per 100 pairs: far fewer threshold samples and log bytes."""
    spec = TraceSpec.parse("churn:pairs=1000000,drift=1024")
    result = replay(iter_trace_spec(spec), config(MIB_THRESHOLD))
    assert result.event_count == 2_010_000
    assert result.threshold_samples >= 1
    assert result.threshold_samples * 10 <= result.rate_samples
    assert result.max_reconstruction_error < MIB_THRESHOLD
    threshold_log, rate_log = render_logs(result)
    assert len(threshold_log.encode()) * 100 <= len(rate_log.encode())


def test_log_sizes_favour_threshold_sampling():
    threshold_bytes, rate_bytes = compare_log_sizes(
        iter_trace_spec(TraceSpec.parse("churn:pairs=100000,drift=1024")), config(MIB_THRESHOLD)
    )
    assert threshold_bytes * 100 <= rate_bytes


def test_staircase_trend_is_exact():
    result = replay(generate_trace(TraceSpec.parse("staircase:steps=5"), SMALL_THRESHOLD), config())
    assert result.threshold_samples == 5
    assert [p.footprint for p in result.trend] == [SMALL_THRESHOLD * k for k in range(1, 6)]
    assert result.max_reconstruction_error == 0
    assert all(r.callsite == STAIR_SITE for r in result.threshold_records)


def test_reconstruction_error_below_threshold_for_many_seeds():
    for seed in range(1000):
        trace = generate_trace(TraceSpec(TraceGenerator.RANDOM, {"seed": seed}))
        result = replay(trace, config())
        assert result.oracle_consistent
        assert result.max_reconstruction_error < SMALL_THRESHOLD, f"seed {seed}"
        assert result.peak_footprint == result.oracle_peak


@pytest.mark.parametrize("n,reported", [(19, True), (18, False)])
def test_leak_reported_after_enough_episodes(n, reported):
    result = replay(generate_trace(TraceSpec(TraceGenerator.LEAK, {"n": n})), config())
    assert result.threshold_samples == n
    score = result.leak_scores[LEAK_SITE]
    assert (score.mallocs, score.frees) == (n, 0)
    assert bool(result.leak_report) is reported
    if reported:
        (entry,) = result.leak_report
        assert entry.callsite == LEAK_SITE
        assert entry.probability == pytest.approx(1 - 1 / 21)
        assert entry.leak_rate > 0


def test_reclaimed_objects_are_not_leaks():
    result = replay(generate_trace(TraceSpec(TraceGenerator.LEAK, {"n": 50, "leak_fraction": 0.0})), config())
    assert result.leak_report == []
    assert int(result.true_footprint[-1]) == 0


def test_invalid_trace_names_the_event():
    site = CHURN_SITE
    trace = [
        AllocEvent(EventKind.ALLOC, 8, 1, DomainTag.NATIVE, site, 0),
        AllocEvent(EventKind.FREE, 8, 2, DomainTag.NATIVE, site, 1),
    ]
    with pytest.raises(InvalidTraceError) as exc:
        replay(trace, config())
    assert exc.value.index == 1
    assert "event 1" in str(exc.value)


def test_empty_trace():
    result = replay([], config())
    assert result.event_count == 0
    assert result.oracle_peak == 0
    assert result.max_reconstruction_error == 0
    threshold_log, rate_log = render_logs(result)
    assert threshold_log == rate_log
    parsed = parse_sample_text(threshold_log)
    assert parsed.records == [] and parsed.footer.events == 0


def test_copies_do_not_move_the_footprint():
    trace = generate_trace(TraceSpec(TraceGenerator.RANDOM, {"events": 400, "copy_prob": 0.4, "seed": 3}))
    result = replay(trace, config(copy_rate_multiple=1))
    copy_bytes = sum(e.size for e in trace if e.kind is EventKind.COPY)
    assert copy_bytes > 0
    assert sum(r.net_delta for r in result.copy_records) == (copy_bytes // SMALL_THRESHOLD) * SMALL_THRESHOLD
    assert all(r.kind is SampleKind.COPY for r in result.copy_records)
    for i, event in enumerate(trace):
        if event.kind is EventKind.COPY and i:
            assert result.true_footprint[i] == result.true_footprint[i - 1]


def test_rendered_logs_parse_in_time_order():
    result = replay(generate_trace(TraceSpec(TraceGenerator.RANDOM, {"copy_prob": 0.2})), config())
    for text in render_logs(result):
        stamps = [r.timestamp for r in parse_sample_text(text).records]
        assert stamps == sorted(stamps)


@given(seed=st.integers(min_value=0, max_value=2**32 - 1), rng_seed=st.one_of(st.none(), st.integers(0, 1000)))
@settings(max_examples=30, deadline=None)
def test_replay_is_byte_stable(seed, rng_seed):
    """
    **Property: replaying the same trace and config twice gives identical JSON**
    """
    trace = generate_trace(TraceSpec(TraceGenerator.RANDOM, {"seed": seed, "copy_prob": 0.1}))
    first = replay(trace, config(deterministic_rng_seed=rng_seed)).to_json()
    second = replay(trace, config(deterministic_rng_seed=rng_seed)).to_json()
    assert first == second
    payload = json.loads(first)
    assert payload["events"] == len(trace)
    assert payload["threshold"] == SMALL_THRESHOLD


def test_true_footprint_series_uses_tick():
    result = replay(generate_trace(TraceSpec.parse("staircase:steps=3"), SMALL_THRESHOLD), config(tick_ns=5))
    assert [(p.timestamp, p.footprint) for p in result.true_footprint_series] == [
        (0, SMALL_THRESHOLD), (5, 2 * SMALL_THRESHOLD), (10, 3 * SMALL_THRESHOLD)
    ]
    assert result.elapsed_ns == 15
