"""Delay-based attribution of CPU time to managed vs native execution.

Timer signals are only handled when the managed runtime regains control,
so any delay beyond the requested quantum q was spent outside it. Each
sample credits ``min(T, q)`` to managed time and ``T - q`` to native
time at the main thread's callsite. Other threads get the whole elapsed
T, to native when they are inside a native call, else to managed, and
nothing while sleeping.

All durations are integer nanoseconds so replays are bit-identical.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, MutableMapping, Optional, Sequence

from heapscope.core.models import FOREIGN_CALLSITE, Callsite

NS_PER_SECOND = 1_000_000_000


class ThreadStatus(Enum):
    """Whether a thread should receive attribution."""
    EXECUTING = "executing"
    SLEEPING = "sleeping"


@dataclass(frozen=True)
class Frame:
    """One stack frame as seen by the sampler."""
    callsite: Callsite
    in_profiled_code: bool


@dataclass(frozen=True)
class ThreadSnapshot:
    """State of a non-main thread at sample time."""
    thread: int
    status: ThreadStatus
    callsite: Callsite
    in_call: bool = False


@dataclass(frozen=True)
class TimerSample:
    """One delivered timer interrupt.

    Attributes:
        elapsed_ns: T, virtual time since the previous sample
        quantum_ns: q, requested interval
        main_stack: Frames of the main thread, outermost first
        thread_snapshots: Other threads at sample time
    """
    elapsed_ns: int
    quantum_ns: int
    main_stack: tuple[Frame, ...] = ()
    thread_snapshots: tuple[ThreadSnapshot, ...] = ()

    def __post_init__(self) -> None:
        if self.elapsed_ns < 0:
            raise ValueError("elapsed time must be >= 0")
        if self.quantum_ns <= 0:
            raise ValueError("quantum must be > 0")

    @property
    def elapsed_seconds(self) -> float:
        return self.elapsed_ns / NS_PER_SECOND


@dataclass
class CpuCounters:
    """Managed and native time of one callsite, in nanoseconds."""
    managed_ns: int = 0
    native_ns: int = 0

    @property
    def managed_seconds(self) -> float:
        return self.managed_ns / NS_PER_SECOND

    @property
    def native_seconds(self) -> float:
        return self.native_ns / NS_PER_SECOND

    @property
    def total_ns(self) -> int:
        return self.managed_ns + self.native_ns


def resolve_attribution(stack: Sequence[Frame]) -> Callsite:
    """Innermost frame inside profiled code, else the ``<foreign>`` callsite."""
    for frame in reversed(stack):
        if frame.in_profiled_code:
            return frame.callsite
    return FOREIGN_CALLSITE


@dataclass
class ThreadRegistry:
    """Per-thread status and native-call flags.

    Threads never registered count as executing. Writers take the lock so
    an update happens-before the next sample's read.
    """
    status: Dict[int, ThreadStatus] = field(default_factory=dict)
    in_native: Dict[int, bool] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def set_status(self, thread: int, status: ThreadStatus) -> None:
        with self._lock:
            self.status[thread] = status

    def set_in_native(self, thread: int, flag: bool) -> None:
        with self._lock:
            self.in_native[thread] = flag

    def status_of(self, thread: int) -> ThreadStatus:
        with self._lock:
            return self.status.get(thread, ThreadStatus.EXECUTING)

    def is_in_native(self, thread: int) -> bool:
        with self._lock:
            return self.in_native.get(thread, False)


def on_timer_sample(
    sample: TimerSample,
    counters: MutableMapping[Callsite, CpuCounters],
    registry: Optional[ThreadRegistry] = None,
) -> MutableMapping[Callsite, CpuCounters]:
    """Attribute one timer sample into counters (mutated and returned)."""
    elapsed, quantum = sample.elapsed_ns, sample.quantum_ns

    if sample.main_stack:
        main = counters.setdefault(resolve_attribution(sample.main_stack), CpuCounters())
        main.managed_ns += min(elapsed, quantum)
        main.native_ns += max(elapsed - quantum, 0)

    for snap in sample.thread_snapshots:
        if snap.status is ThreadStatus.SLEEPING:
            continue
        if registry is not None and registry.status_of(snap.thread) is ThreadStatus.SLEEPING:
            continue
        row = counters.setdefault(snap.callsite, CpuCounters())
        if snap.in_call:
            row.native_ns += elapsed
        else:
            row.managed_ns += elapsed
    return counters


class CpuAttributor:
    """Accumulates per-callsite CPU counters from timer samples."""

    def __init__(self) -> None:
        self.counters: Dict[Callsite, CpuCounters] = {}
        self.registry = ThreadRegistry()
        self.samples_seen = 0
        self.total_elapsed_ns = 0

    def on_timer_sample(self, sample: TimerSample) -> None:
        on_timer_sample(sample, self.counters, self.registry)
        self.samples_seen += 1
        if sample.main_stack:
            self.total_elapsed_ns += sample.elapsed_ns

    def replay(self, samples: Iterable[TimerSample]) -> Dict[Callsite, CpuCounters]:
        for sample in samples:
            self.on_timer_sample(sample)
        return self.counters

    def set_thread_status(self, thread: int, status: ThreadStatus) -> None:
        """Mark a thread executing or sleeping; unknown threads are created."""
        self.registry.set_status(thread, status)

    def managed_share(self, callsite: Callsite) -> float:
        row = self.counters.get(callsite)
        if row is None or row.total_ns == 0:
            return 0.0
        return row.managed_ns / row.total_ns
