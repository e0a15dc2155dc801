# Storage module
"""Line-delimited sample, trace and timer-log files."""

from heapscope.storage.samplefile import (
    FORMAT_VERSION,
    SampleFileHeader,
    SampleFileFooter,
    SampleFile,
    ISampleSink,
    SampleFileWriter,
    format_record,
    parse_record,
    parse_sample_text,
    read_sample_file,
    render_sample_file,
)
from heapscope.storage.tracefile import iter_trace, read_trace, write_trace
from heapscope.storage.timerlog import TimerLogWriter, iter_timer_log, read_timer_log, write_timer_log

__all__ = [
    "FORMAT_VERSION",
    "SampleFileHeader",
    "SampleFileFooter",
    "SampleFile",
    "ISampleSink",
    "SampleFileWriter",
    "format_record",
    "parse_record",
    "parse_sample_text",
    "read_sample_file",
    "render_sample_file",
    "iter_trace",
    "read_trace",
    "write_trace",
    "TimerLogWriter",
    "iter_timer_log",
    "read_timer_log",
    "write_timer_log",
]
