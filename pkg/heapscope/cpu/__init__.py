# CPU module
"""Managed vs native CPU time attribution."""

from .attributor import (
    ThreadStatus,
    Frame,
    ThreadSnapshot,
    TimerSample,
    CpuCounters,
    ThreadRegistry,
    CpuAttributor,
    resolve_attribution,
    on_timer_sample,
)
from .timer import CpuSampler, is_profiled_file, frame_to_stack, set_thread_status, sleeping, native_section

__all__ = [
    "ThreadStatus",
    "Frame",
    "ThreadSnapshot",
    "TimerSample",
    "CpuCounters",
    "ThreadRegistry",
    "CpuAttributor",
    "resolve_attribution",
    "on_timer_sample",
    "CpuSampler",
    "is_profiled_file",
    "frame_to_stack",
    "set_thread_status",
    "sleeping",
    "native_section",
]
