"""Sample file writer and reader.

A sample file is UTF-8 text, one record per ``\\n``-terminated line:

    #heapscope  1  threshold=T  copy_rate=R  quantum_ns=q  seed=S  start_ns=t0
    kind  timestamp_ns  net_delta  footprint  peak  managed_fraction  file  line  alloc_id
    ...
    #end  events=n  allocs=n  frees=n  copies=n  samples=n  peak=B  elapsed_ns=t

Fields are tab-separated. Every record is flushed as it is written, so a
crashed run loses at most its last partial line.
"""

from __future__ import annotations

import io
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, TextIO

from heapscope.core.models import Callsite, SampleKind, SampleRecord
from heapscope.errors import FormatVersionError, SampleFileError

from .codec import decode_path, encode_path, fixed6, parse_int, parse_key_values

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"
HEADER_TAG = "#heapscope"
FOOTER_TAG = "#end"


@dataclass(frozen=True)
class SampleFileHeader:
    """Config echo written as the first line."""
    threshold: int
    copy_rate: int
    quantum_ns: int
    seed: Optional[int] = None
    start_ns: int = 0
    version: str = FORMAT_VERSION


@dataclass(frozen=True)
class SampleFileFooter:
    """Run totals written when the file is sealed."""
    events: int = 0
    allocs: int = 0
    frees: int = 0
    copies: int = 0
    samples: int = 0
    peak: int = 0
    elapsed_ns: int = 0


@dataclass
class SampleFile:
    """Parsed contents of one sample file.

    Attributes:
        header: Config echo
        records: Complete body records in file order
        footer: Totals, or None if the run never sealed the file
        truncated: True if a trailing partial record was dropped
        path: Source path, if read from disk
    """
    header: SampleFileHeader
    records: List[SampleRecord] = field(default_factory=list)
    footer: Optional[SampleFileFooter] = None
    truncated: bool = False
    path: Optional[str] = None


def format_header(header: SampleFileHeader) -> str:
    seed = "-" if header.seed is None else str(header.seed)
    return (
        f"{HEADER_TAG}\t{header.version}\tthreshold={header.threshold}\tcopy_rate={header.copy_rate}"
        f"\tquantum_ns={header.quantum_ns}\tseed={seed}\tstart_ns={header.start_ns}\n"
    )


def format_record(record: SampleRecord) -> str:
    alloc_id = "-" if record.alloc_id is None else str(record.alloc_id)
    return (
        f"{record.kind.value}\t{record.timestamp}\t{record.net_delta}\t{record.footprint}"
        f"\t{record.peak_footprint}\t{fixed6(record.managed_fraction)}"
        f"\t{encode_path(record.callsite.file)}\t{record.callsite.line}\t{alloc_id}\n"
    )


def format_footer(footer: SampleFileFooter) -> str:
    return (
        f"{FOOTER_TAG}\tevents={footer.events}\tallocs={footer.allocs}\tfrees={footer.frees}"
        f"\tcopies={footer.copies}\tsamples={footer.samples}\tpeak={footer.peak}"
        f"\telapsed_ns={footer.elapsed_ns}\n"
    )


def parse_header(line: str, path: Optional[str] = None) -> SampleFileHeader:
    fields = line.rstrip("\n").split("\t")
    if not fields or fields[0] != HEADER_TAG or len(fields) < 2:
        raise SampleFileError("missing sample file header", path, 1)
    if fields[1] != FORMAT_VERSION:
        raise FormatVersionError(fields[1], FORMAT_VERSION, path)
    try:
        kv = parse_key_values(fields[2:])
        seed = kv.get("seed", "-")
        return SampleFileHeader(
            threshold=parse_int(kv["threshold"], "threshold"),
            copy_rate=parse_int(kv["copy_rate"], "copy_rate"),
            quantum_ns=parse_int(kv["quantum_ns"], "quantum_ns"),
            seed=None if seed == "-" else parse_int(seed, "seed"),
            start_ns=parse_int(kv.get("start_ns", "0"), "start_ns"),
            version=fields[1],
        )
    except (KeyError, ValueError) as e:
        raise SampleFileError(f"bad header: {e}", path, 1) from None


def parse_record(line: str) -> SampleRecord:
    """Parse one body line.

    Raises:
        ValueError: If the line is malformed
    """
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 9:
        raise ValueError(f"expected 9 fields, got {len(fields)}")
    kind, ts, delta, footprint, peak, fraction, file, line_no, alloc_id = fields
    try:
        sample_kind = SampleKind(kind)
    except ValueError:
        raise ValueError(f"unknown record kind {kind!r}") from None
    return SampleRecord(
        kind=sample_kind,
        timestamp=parse_int(ts, "timestamp"),
        net_delta=parse_int(delta, "net_delta"),
        footprint=parse_int(footprint, "footprint"),
        peak_footprint=parse_int(peak, "peak"),
        managed_fraction=float(fraction),
        callsite=Callsite(decode_path(file), parse_int(line_no, "line")),
        alloc_id=None if alloc_id == "-" else parse_int(alloc_id, "alloc_id"),
    )


def parse_footer(line: str) -> SampleFileFooter:
    kv = parse_key_values(line.rstrip("\n").split("\t")[1:])
    return SampleFileFooter(**{k: parse_int(v, k) for k, v in kv.items() if k in SampleFileFooter.__dataclass_fields__})


class ISampleSink(ABC):
    """Destination for sample records."""

    @abstractmethod
    def write_header(self, header: SampleFileHeader) -> None:
        ...

    @abstractmethod
    def write_record(self, record: SampleRecord) -> None:
        ...

    @abstractmethod
    def write_footer(self, footer: SampleFileFooter) -> None:
        ...

    @abstractmethod
    def close(self) -> None:
        ...


class SampleFileWriter(ISampleSink):
    """Append-only sample file writer.

    Accepts a path (opened and owned by the writer) or an open text
    stream (left open on close). ``bytes_written`` counts encoded bytes.
    """

    def __init__(self, target: str | Path | TextIO) -> None:
        if isinstance(target, (str, Path)):
            self._path: Optional[Path] = Path(target)
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._stream: TextIO = self._path.open("w", encoding="utf-8", newline="\n")
            self._owns_stream = True
        else:
            self._path = None
            self._stream = target
            self._owns_stream = False
        self.bytes_written = 0
        self.records_written = 0
        self._closed = False

    @property
    def path(self) -> Optional[Path]:
        return self._path

    def _write(self, line: str) -> None:
        try:
            self._stream.write(line)
            self._stream.flush()
        except (OSError, ValueError) as e:
            logger.error(f"Failed to write sample file {self._path or '<stream>'}: {e}")
            raise
        self.bytes_written += len(line.encode("utf-8"))

    def write_header(self, header: SampleFileHeader) -> None:
        self._write(format_header(header))

    def write_record(self, record: SampleRecord) -> None:
        self._write(format_record(record))
        self.records_written += 1

    def write_footer(self, footer: SampleFileFooter) -> None:
        self._write(format_footer(footer))

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._owns_stream:
            try:
                self._stream.close()
            except OSError as e:
                logger.error(f"Failed to close sample file {self._path}: {e}")


def parse_sample_text(text: str, path: Optional[str] = None) -> SampleFile:
    """Parse sample file contents.

    Raises:
        SampleFileError: On a malformed complete line (names path:line)
        FormatVersionError: On a version mismatch
    """
    lines = text.splitlines(keepends=True)
    if not lines:
        raise SampleFileError("empty sample file", path)
    header = parse_header(lines[0], path)
    result = SampleFile(header=header, path=path)

    for number, raw in enumerate(lines[1:], start=2):
        if not raw.endswith("\n"):
            logger.warning(f"{path or '<text>'}:{number}: dropping truncated final record")
            result.truncated = True
            break
        if result.footer is not None:
            raise SampleFileError("record after footer", path, number)
        try:
            if raw.startswith(FOOTER_TAG + "\t") or raw.rstrip("\n") == FOOTER_TAG:
                result.footer = parse_footer(raw)
            else:
                result.records.append(parse_record(raw))
        except ValueError as e:
            raise SampleFileError(str(e), path, number) from None
    return result


def read_sample_file(path: str | Path) -> SampleFile:
    """Read and parse a sample file from disk."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to read sample file '{p}': {e}")
        raise
    return parse_sample_text(text, str(p))


def render_sample_file(header: SampleFileHeader, records: List[SampleRecord], footer: SampleFileFooter) -> str:
    """Serialise a complete sample file to a string."""
    buffer = io.StringIO()
    writer = SampleFileWriter(buffer)
    writer.write_header(header)
    for record in records:
        writer.write_record(record)
    writer.write_footer(footer)
    return buffer.getvalue()
