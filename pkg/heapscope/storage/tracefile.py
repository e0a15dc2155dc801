"""Allocation trace files.

Header ``#heapscope-trace<TAB>1``, then one event per line:
``kind  size  alloc_id  domain  file  line  timestamp_ns  [thread]``.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Iterator, List

from heapscope.core.models import AllocEvent, Callsite, DomainTag, EventKind
from heapscope.errors import FormatVersionError, SampleFileError

from .codec import decode_path, encode_path, parse_int

logger = logging.getLogger(__name__)

TRACE_TAG = "#heapscope-trace"
TRACE_VERSION = "1"


def format_event(event: AllocEvent) -> str:
    return (
        f"{event.kind.value}\t{event.size}\t{event.alloc_id}\t{event.domain.value}"
        f"\t{encode_path(event.callsite.file)}\t{event.callsite.line}\t{event.timestamp}\t{event.thread}\n"
    )


def parse_event(line: str) -> AllocEvent:
    fields = line.rstrip("\n").split("\t")
    if len(fields) not in (7, 8):
        raise ValueError(f"expected 7 or 8 fields, got {len(fields)}")
    kind, size, alloc_id, domain, file, line_no, ts = fields[:7]
    return AllocEvent(
        kind=EventKind(kind),
        size=parse_int(size, "size"),
        alloc_id=parse_int(alloc_id, "alloc_id"),
        domain=DomainTag(domain),
        callsite=Callsite(decode_path(file), parse_int(line_no, "line")),
        timestamp=parse_int(ts, "timestamp"),
        thread=parse_int(fields[7], "thread") if len(fields) == 8 else 0,
    )


def write_trace(path: str | Path, events: Iterable[AllocEvent]) -> int:
    """Write events to a trace file and return the number written."""
    p = Path(path)
    count = 0
    try:
        with p.open("w", encoding="utf-8", newline="\n") as f:
            f.write(f"{TRACE_TAG}\t{TRACE_VERSION}\n")
            for event in events:
                f.write(format_event(event))
                count += 1
    except OSError as e:
        logger.error(f"Failed to write trace '{p}': {e}")
        raise
    return count


def iter_trace(path: str | Path) -> Iterator[AllocEvent]:
    """Stream events from a trace file.

    Raises:
        SampleFileError: On a malformed line (names path:line)
        FormatVersionError: On a version mismatch
    """
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="") as f:
        first = f.readline()
        fields = first.rstrip("\n").split("\t")
        if fields[0] != TRACE_TAG or len(fields) < 2:
            raise SampleFileError("missing trace header", p, 1)
        if fields[1] != TRACE_VERSION:
            raise FormatVersionError(fields[1], TRACE_VERSION, p)
        for number, raw in enumerate(f, start=2):
            if not raw.strip():
                continue
            try:
                yield parse_event(raw)
            except ValueError as e:
                raise SampleFileError(str(e), p, number) from None


def read_trace(path: str | Path) -> List[AllocEvent]:
    return list(iter_trace(path))
