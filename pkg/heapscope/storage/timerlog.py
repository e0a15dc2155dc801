"""Timer-sample logs.

Header ``#heapscope-timer<TAB>1<TAB>quantum_ns``, then one line per sample:
``S  elapsed_ns  quantum_ns  stack  threads``. The stack lists frames
outermost first as ``file:line:flag`` joined by ``;``; threads are
``tid:status:in_call:file:line`` joined by ``;``. ``-`` marks an empty list.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, TextIO

from heapscope.core.models import Callsite
from heapscope.cpu.attributor import Frame, ThreadSnapshot, ThreadStatus, TimerSample
from heapscope.errors import FormatVersionError, SampleFileError

from .codec import decode_path, encode_path, parse_int

logger = logging.getLogger(__name__)

TIMER_TAG = "#heapscope-timer"
TIMER_VERSION = "1"


def _format_frame(frame: Frame) -> str:
    return f"{encode_path(frame.callsite.file)}:{frame.callsite.line}:{int(frame.in_profiled_code)}"


def _format_thread(snap: ThreadSnapshot) -> str:
    return (
        f"{snap.thread}:{snap.status.value}:{int(snap.in_call)}"
        f":{encode_path(snap.callsite.file)}:{snap.callsite.line}"
    )


def format_timer_sample(sample: TimerSample) -> str:
    stack = ";".join(_format_frame(f) for f in sample.main_stack) or "-"
    threads = ";".join(_format_thread(t) for t in sample.thread_snapshots) or "-"
    return f"S\t{sample.elapsed_ns}\t{sample.quantum_ns}\t{stack}\t{threads}\n"


def _parse_frame(text: str) -> Frame:
    file, line, flag = text.rsplit(":", 2)
    return Frame(Callsite(decode_path(file), parse_int(line, "line")), flag == "1")


def _parse_thread(text: str) -> ThreadSnapshot:
    tid, status, in_call, rest = text.split(":", 3)
    file, line = rest.rsplit(":", 1)
    return ThreadSnapshot(
        thread=parse_int(tid, "thread"),
        status=ThreadStatus(status),
        callsite=Callsite(decode_path(file), parse_int(line, "line")),
        in_call=in_call == "1",
    )


def parse_timer_sample(line: str) -> TimerSample:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 5 or fields[0] != "S":
        raise ValueError("expected 'S' record with 5 fields")
    stack = () if fields[3] == "-" else tuple(_parse_frame(f) for f in fields[3].split(";"))
    threads = () if fields[4] == "-" else tuple(_parse_thread(t) for t in fields[4].split(";"))
    return TimerSample(
        elapsed_ns=parse_int(fields[1], "elapsed_ns"),
        quantum_ns=parse_int(fields[2], "quantum_ns"),
        main_stack=stack,
        thread_snapshots=threads,
    )


class TimerLogWriter:
    """Line-flushed timer log writer; callable so it can be a CpuSampler sink."""

    def __init__(self, path: str | Path, quantum_ns: int) -> None:
        self._path = Path(path)
        self._stream: Optional[TextIO] = self._path.open("w", encoding="utf-8", newline="\n")
        self._stream.write(f"{TIMER_TAG}\t{TIMER_VERSION}\t{quantum_ns}\n")
        self._stream.flush()

    def __call__(self, sample: TimerSample) -> None:
        if self._stream is None:
            return
        try:
            self._stream.write(format_timer_sample(sample))
            self._stream.flush()
        except OSError as e:
            logger.error(f"Failed to write timer log '{self._path}': {e}")

    def close(self) -> None:
        if self._stream is not None:
            self._stream.close()
            self._stream = None


def write_timer_log(path: str | Path, samples: Iterable[TimerSample], quantum_ns: int) -> None:
    writer = TimerLogWriter(path, quantum_ns)
    try:
        for sample in samples:
            writer(sample)
    finally:
        writer.close()


def iter_timer_log(path: str | Path) -> Iterator[TimerSample]:
    """Stream samples from a timer log; a trailing partial line is dropped."""
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="") as f:
        fields = f.readline().rstrip("\n").split("\t")
        if fields[0] != TIMER_TAG or len(fields) < 2:
            raise SampleFileError("missing timer log header", p, 1)
        if fields[1] != TIMER_VERSION:
            raise FormatVersionError(fields[1], TIMER_VERSION, p)
        for number, raw in enumerate(f, start=2):
            if not raw.endswith("\n"):
                logger.warning(f"{p}:{number}: dropping truncated final timer sample")
                return
            try:
                yield parse_timer_sample(raw)
            except ValueError as e:
                raise SampleFileError(str(e), p, number) from None


def read_timer_log(path: str | Path) -> List[TimerSample]:
    return list(iter_timer_log(path))
