"""Tests for profile aggregation and rendering."""

from __future__ import annotations

import itertools
import json
from decimal import Decimal

import pytest

from heapscope.core import MIB, Callsite, ProfilerConfig, SampleKind, SampleRecord
from heapscope.cpu import Frame, ThreadSnapshot, ThreadStatus, TimerSample
from heapscope.errors import FormatVersionError
from heapscope.report import (
    CallsiteStats,
    ProfileDocument,
    aggregate,
    parse_json,
    render_json,
    render_text,
    sort_rows,
)
from heapscope.shim import PoolAllocator, ShimRuntime
from heapscope.storage import SampleFileFooter, SampleFileHeader, SampleFileWriter, render_sample_file, write_timer_log

SITE_A = Callsite("app.py", 10)
SITE_B = Callsite("lib/helpers.py", 42)
SITE_C = Callsite("worker.py", 7)

HEADER = SampleFileHeader(threshold=1009, copy_rate=2018, quantum_ns=10_000_000, start_ns=0)
FOOTER = SampleFileFooter(events=10, allocs=5, frees=3, copies=2, samples=4, peak=5000, elapsed_ns=1_000_000_000)

RECORDS_A = [
    SampleRecord(SampleKind.GROWTH, 100, 2000, 2000, 2000, 0.5, SITE_A, 1),
    SampleRecord(SampleKind.DECLINE, 300, -2000, 3000, 5000, 0.0, SITE_A, 1),
]
RECORDS_B = [
    SampleRecord(SampleKind.GROWTH, 200, 3000, 5000, 5000, 0.0, SITE_B, 2),
    SampleRecord(SampleKind.COPY, 400, 2 * MIB, 3000, 5000, 0.0, SITE_B, None),
]


def write_samples(path, records, footer=FOOTER):
    path.write_text(render_sample_file(HEADER, records, footer), encoding="utf-8")
    return path


@pytest.fixture
def single_file(tmp_path):
    return write_samples(tmp_path / "all.samples", sorted(RECORDS_A + RECORDS_B, key=lambda r: r.timestamp))


def test_memory_columns(single_file):
    doc = aggregate([single_file])
    a, b = doc.row(SITE_A), doc.row(SITE_B)
    assert a.alloc_bytes_sampled == 2000
    assert a.peak_contribution == 2000
    assert a.managed_alloc_fraction == Decimal("0.500000")
    assert a.avg_footprint_share == Decimal("2000.000000")
    assert b.alloc_bytes_sampled == 3000
    assert b.avg_footprint_share == Decimal("1500.000000")
    assert b.copy_mbps == Decimal("2.000000")
    assert a.copy_mbps == Decimal("0.000000")
    assert [p.footprint for p in doc.trend] == [2000, 5000, 3000]
    assert doc.peak_footprint == 5000
    assert doc.elapsed_ns == 1_000_000_000
    assert doc.sample_count == 4
    assert doc.totals.alloc_bytes_sampled == 5000
    assert doc.leaks == []
    assert [r.callsite for r in doc.rows] == [SITE_B, SITE_A]
    assert doc.config["threshold"] == 1009 and doc.config["leak_estimator"] == "printed"


def test_file_order_does_not_matter(tmp_path, single_file):
    first = write_samples(tmp_path / "a.samples", RECORDS_A)
    second = write_samples(tmp_path / "b.samples", RECORDS_B)
    expected = render_json(aggregate([single_file]))
    assert render_json(aggregate([first, second])) == expected
    assert render_json(aggregate([second, first])) == expected


def test_cpu_columns_from_timer_log(tmp_path, single_file):
    log = tmp_path / "cpu.log"
    write_timer_log(
        log,
        [
            TimerSample(15_000_000, 10_000_000, (Frame(SITE_A, True),)),
            TimerSample(10_000_000, 10_000_000, (), (ThreadSnapshot(5, ThreadStatus.EXECUTING, SITE_C, in_call=True),)),
        ],
        10_000_000,
    )
    doc = aggregate([single_file], timer_log=log, sort_key="cpu")
    a, c = doc.row(SITE_A), doc.row(SITE_C)
    assert (a.cpu.managed_ns, a.cpu.native_ns) == (10_000_000, 5_000_000)
    assert a.managed_seconds == Decimal("0.010000")
    assert (c.cpu.managed_ns, c.cpu.native_ns) == (0, 10_000_000)
    assert c.alloc_bytes_sampled == 0
    assert [r.callsite for r in doc.rows][:2] == [SITE_A, SITE_C]
    assert doc.totals.managed_ns == 10_000_000
    assert doc.totals.native_ns == 15_000_000


def test_leak_reported_from_live_run(tmp_path):
    path = tmp_path / "leak.samples"
    config = ProfilerConfig(threshold_bytes=1009, output_path=str(path))
    runtime = ShimRuntime(config, PoolAllocator(), SampleFileWriter(path), clock=itertools.count(0, 1_000_000).__next__)
    for _ in range(19):
        runtime.interposed_alloc(2000)
    runtime.flush_and_finalize()

    doc = aggregate([path], sort_key="leak_rate")
    (entry,) = doc.leaks
    assert entry.score.mallocs == 19 and entry.score.frees == 0
    assert entry.probability == float(Decimal("0.952381"))
    assert doc.rows[0].leak is entry
    assert "possible leaks" in render_text(doc)


def test_reclaimed_allocations_are_not_reported(tmp_path):
    path = tmp_path / "ok.samples"
    config = ProfilerConfig(threshold_bytes=1009, output_path=str(path))
    runtime = ShimRuntime(config, PoolAllocator(), SampleFileWriter(path))
    for _ in range(30):
        runtime.interposed_free(runtime.interposed_alloc(2000))
    runtime.flush_and_finalize()
    kinds = {r.kind for r in runtime.records}
    assert SampleKind.RECLAIM in kinds
    doc = aggregate([path])
    assert doc.leaks == []
    # Reclaim bookkeeping is not a sample.
    assert doc.sample_count == sum(1 for r in runtime.records if r.kind is not SampleKind.RECLAIM)


def test_tied_timestamps_keep_emission_order(tmp_path):
    """A frozen clock must not reorder reclaims after the growth samples they settle."""
    path = tmp_path / "tied.samples"
    config = ProfilerConfig(threshold_bytes=11, output_path=str(path))
    runtime = ShimRuntime(config, PoolAllocator(), SampleFileWriter(path), clock=lambda: 5)
    for _ in range(40):
        runtime.interposed_free(runtime.interposed_alloc(1000))
        runtime.interposed_alloc(11)
    runtime.flush_and_finalize()
    (score,) = [s for s in runtime.leaks.scores.values() if s.mallocs]
    assert (score.mallocs, score.frees) == (40, 39)

    doc = aggregate([path])
    assert doc.leaks == []
    assert [p.footprint for p in doc.trend] == [p.footprint for p in runtime.sampler.trend_series()]


def test_truncated_input_is_flagged(tmp_path):
    path = write_samples(tmp_path / "cut.samples", RECORDS_A)
    text = path.read_text(encoding="utf-8")
    path.write_text(text.split("#end")[0] + "growth\t900\t1", encoding="utf-8")
    doc = aggregate([path])
    assert doc.truncated
    assert doc.elapsed_ns == 200
    assert "truncated" in render_text(doc)


def test_aggregate_errors(tmp_path, single_file):
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([single_file], sort_key="size")
    with pytest.raises(OSError):
        aggregate([tmp_path / "missing.samples"])


def test_sort_rows_ties_by_callsite():
    rows = [CallsiteStats(SITE_B), CallsiteStats(SITE_A), CallsiteStats(SITE_C)]
    assert [r.callsite for r in sort_rows(rows, "peak_mem")] == [SITE_A, SITE_B, SITE_C]


def test_text_report(single_file):
    text = render_text(aggregate([single_file]), "peak_mem")
    assert "avg = time-weighted mean" in text
    assert "total" in text
    assert "possible leaks" not in text
    assert text.index(str(SITE_B)) < text.index(str(SITE_A))


def test_json_round_trip_is_byte_identical(single_file):
    text = render_json(aggregate([single_file]))
    data = json.loads(text)
    assert "leaks" not in data
    assert data["average_memory"].startswith("avg")
    assert data["rows"][0]["avg_footprint_share"] == "1500.000000"
    assert render_json(parse_json(text)) == text


def test_json_version_mismatch():
    payload = json.loads(render_json(ProfileDocument()))
    payload["format_version"] = "2"
    with pytest.raises(FormatVersionError):
        parse_json(json.dumps(payload))
