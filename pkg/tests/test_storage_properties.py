"""
Property-based tests for the sample, trace and timer-log file formats.

Covers header/footer parsing, truncated tails, version checks and the
per-line flush guarantee.
"""

from __future__ import annotations

import io

import pytest
from hypothesis import given, settings, strategies as st

from heapscope.core import AllocEvent, Callsite, DomainTag, EventKind, SampleKind, SampleRecord
from heapscope.cpu import Frame, ThreadSnapshot, ThreadStatus, TimerSample
from heapscope.errors import FormatVersionError, SampleFileError
from heapscope.storage import (
    SampleFileFooter,
    SampleFileHeader,
    SampleFileWriter,
    TimerLogWriter,
    format_record,
    parse_record,
    parse_sample_text,
    read_sample_file,
    read_timer_log,
    read_trace,
    render_sample_file,
    write_timer_log,
    write_trace,
)
from heapscope.storage.codec import fixed6, quantize6

HEADER = SampleFileHeader(threshold=1009, copy_rate=2018, quantum_ns=10_000_000, seed=5, start_ns=100)
FOOTER = SampleFileFooter(events=3, allocs=2, frees=1, copies=0, samples=1, peak=2048, elapsed_ns=500)

# Tabs, newlines, ';' and '%' in paths must survive the tab-separated layout.
file_names = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    min_size=1,
    max_size=30,
)


@st.composite
def records(draw):
    footprint = draw(st.integers(min_value=0, max_value=2**40))
    return SampleRecord(
        kind=draw(st.sampled_from(list(SampleKind))),
        timestamp=draw(st.integers(min_value=0, max_value=2**62)),
        net_delta=draw(st.integers(min_value=-(2**40), max_value=2**40)),
        footprint=footprint,
        peak_footprint=footprint + draw(st.integers(min_value=0, max_value=2**20)),
        managed_fraction=draw(st.integers(min_value=0, max_value=1_000_000)) / 1_000_000,
        callsite=Callsite(draw(file_names), draw(st.integers(min_value=1, max_value=10**6))),
        alloc_id=draw(st.one_of(st.none(), st.integers(min_value=0, max_value=2**63))),
    )


def growth(ts: int, file: str = "app.py") -> SampleRecord:
    return SampleRecord(SampleKind.GROWTH, ts, 2048, 2048, 2048, 0.25, Callsite(file, 3), 7)


@given(record=records())
@settings(max_examples=200)
def test_record_lines_parse_back(record):
    """
    **Property: any record with 6-place fraction survives format then parse**
    """
    line = format_record(record)
    assert line.endswith("\n") and line.count("\n") == 1
    assert line.count("\t") == 8
    assert parse_record(line) == record


def test_fixed6_rounding():
    assert fixed6(0.25) == "0.250000"
    assert fixed6(1) == "1.000000"
    assert str(quantize6("0.0000005")) == "0.000000"
    assert str(quantize6("0.0000015")) == "0.000002"


def test_render_then_parse(tmp_path):
    text = render_sample_file(HEADER, [growth(1), growth(2, "lib/x.py")], FOOTER)
    path = tmp_path / "run.samples"
    path.write_text(text, encoding="utf-8")
    parsed = read_sample_file(path)
    assert parsed.header == HEADER
    assert parsed.footer == FOOTER
    assert [r.callsite.file for r in parsed.records] == ["app.py", "lib/x.py"]
    assert not parsed.truncated
    assert parsed.path == str(path)


def test_seedless_header():
    text = render_sample_file(SampleFileHeader(1009, 2018, 10_000_000), [], FOOTER)
    assert "\tseed=-\t" in text
    assert parse_sample_text(text).header.seed is None


def test_truncated_final_record_is_dropped():
    text = render_sample_file(HEADER, [growth(1), growth(2)], FOOTER)
    body = text.split("#end")[0]
    cut = body[: body.rindex("\n", 0, len(body) - 1) + 1] + "growth\t3\t20"
    parsed = parse_sample_text(cut)
    assert parsed.truncated
    assert len(parsed.records) == 1
    assert parsed.footer is None


def test_malformed_line_names_location(tmp_path):
    text = render_sample_file(HEADER, [growth(1)], FOOTER).replace("growth\t1\t", "growth\tx\t")
    path = tmp_path / "bad.samples"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(SampleFileError) as exc:
        read_sample_file(path)
    assert exc.value.line_number == 2
    assert f"{path}:2" in str(exc.value)


def test_unknown_kind_and_wrong_field_count():
    with pytest.raises(ValueError):
        parse_record("grow\t1\t1\t1\t1\t0.0\ta.py\t1\t-\n")
    with pytest.raises(ValueError):
        parse_record("growth\t1\t1\n")


def test_record_after_footer_rejected():
    text = render_sample_file(HEADER, [], FOOTER) + format_record(growth(9))
    with pytest.raises(SampleFileError):
        parse_sample_text(text)


def test_version_mismatch():
    text = render_sample_file(HEADER, [], FOOTER).replace("#heapscope\t1\t", "#heapscope\t9\t", 1)
    with pytest.raises(FormatVersionError) as exc:
        parse_sample_text(text, "old.samples")
    assert exc.value.found == "9"
    assert exc.value.expected == "1"


def test_empty_and_headerless_files():
    with pytest.raises(SampleFileError):
        parse_sample_text("")
    with pytest.raises(SampleFileError):
        parse_sample_text("growth\t1\n")


def test_writer_flushes_every_line(tmp_path):
    path = tmp_path / "live.samples"
    writer = SampleFileWriter(path)
    writer.write_header(HEADER)
    writer.write_record(growth(1))
    # Readable before close.
    parsed = read_sample_file(path)
    assert len(parsed.records) == 1
    assert parsed.footer is None
    writer.write_footer(FOOTER)
    writer.close()
    writer.close()
    assert writer.records_written == 1
    assert writer.bytes_written == path.stat().st_size


def test_writer_leaves_borrowed_stream_open():
    buffer = io.StringIO()
    writer = SampleFileWriter(buffer)
    writer.write_header(HEADER)
    writer.close()
    assert not buffer.closed
    assert buffer.getvalue().startswith("#heapscope\t1\t")


def test_writer_propagates_write_errors():
    buffer = io.StringIO()
    buffer.close()
    writer = SampleFileWriter(buffer)
    with pytest.raises(ValueError):
        writer.write_header(HEADER)


def test_trace_file(tmp_path):
    site = Callsite("dir with\ttab/a.py", 4)
    events = [
        AllocEvent(EventKind.ALLOC, 64, 1, DomainTag.MANAGED, site, 0),
        AllocEvent(EventKind.COPY, 32, 0, DomainTag.NATIVE, site, 1, thread=3),
        AllocEvent(EventKind.FREE, 64, 1, DomainTag.MANAGED, site, 2),
    ]
    path = tmp_path / "t.trace"
    assert write_trace(path, events) == 3
    assert read_trace(path) == events


def test_trace_bad_line(tmp_path):
    path = tmp_path / "t.trace"
    path.write_text("#heapscope-trace\t1\nalloc\t64\t1\tmanaged\ta.py\t4\n", encoding="utf-8")
    with pytest.raises(SampleFileError) as exc:
        read_trace(path)
    assert exc.value.line_number == 2


def test_trace_version_and_header(tmp_path):
    path = tmp_path / "t.trace"
    path.write_text("#heapscope-trace\t2\n", encoding="utf-8")
    with pytest.raises(FormatVersionError):
        read_trace(path)
    path.write_text("alloc\n", encoding="utf-8")
    with pytest.raises(SampleFileError):
        read_trace(path)


def test_timer_log(tmp_path):
    samples = [
        TimerSample(12_000_000, 10_000_000, (Frame(Callsite("x;y.py", 1), False), Frame(Callsite("app.py", 9), True))),
        TimerSample(
            10_000_000,
            10_000_000,
            (),
            (ThreadSnapshot(42, ThreadStatus.SLEEPING, Callsite("w:1.py", 3), in_call=True),),
        ),
    ]
    path = tmp_path / "cpu.log"
    write_timer_log(path, samples, 10_000_000)
    assert read_timer_log(path) == samples


def test_timer_log_truncated_tail(tmp_path):
    path = tmp_path / "cpu.log"
    writer = TimerLogWriter(path, 10_000_000)
    writer(TimerSample(10_000_000, 10_000_000))
    writer.close()
    writer(TimerSample(1, 1))
    with path.open("a", encoding="utf-8") as f:
        f.write("S\t5")
    assert len(read_timer_log(path)) == 1
