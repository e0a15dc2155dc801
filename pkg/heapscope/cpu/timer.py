"""Live CPU sampling through a virtual-time interval timer.

The interpreter only runs signal handlers between bytecodes, so the
delay between timer expiry and handler entry is time spent in native
code. ``CpuSampler`` measures that delay with ``time.process_time_ns``
and feeds ``TimerSample`` objects to a ``CpuAttributor``.

In deferred mode the handler only records that the timer fired; the
sample is taken at the next ``safepoint()`` call made by the embedder.
"""

from __future__ import annotations

import logging
import os
import signal
import sys
import sysconfig
import threading
import time
from contextlib import contextmanager
from types import FrameType
from typing import Callable, Iterator, List, Optional, Tuple

from heapscope.core.models import UNKNOWN_CALLSITE, Callsite

from .attributor import CpuAttributor, Frame, ThreadSnapshot, ThreadStatus, TimerSample, resolve_attribution

logger = logging.getLogger(__name__)

MAX_STACK_DEPTH = 64

_PACKAGE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
_EXCLUDED_DIRS = tuple(
    os.path.abspath(p)
    for p in {sysconfig.get_paths().get("stdlib"), sysconfig.get_paths().get("purelib"), _PACKAGE_DIR}
    if p
)


def is_profiled_file(filename: str) -> bool:
    """True for user source: not the interpreter library, site-packages or heapscope."""
    if not filename or filename.startswith("<"):
        return False
    path = os.path.abspath(filename)
    return not path.startswith(_EXCLUDED_DIRS)


def frame_to_stack(frame: Optional[FrameType], profiled: Callable[[str], bool] = is_profiled_file) -> Tuple[Frame, ...]:
    """Convert an interpreter frame chain into Frames, outermost first."""
    stack: List[Frame] = []
    depth = 0
    while frame is not None and depth < MAX_STACK_DEPTH:
        code = frame.f_code
        lineno = frame.f_lineno or 1
        stack.append(Frame(
            callsite=Callsite(code.co_filename or UNKNOWN_CALLSITE.file, max(lineno, 1), code.co_name),
            in_profiled_code=profiled(code.co_filename),
        ))
        frame = frame.f_back
        depth += 1
    stack.reverse()
    return tuple(stack)


class CpuSampler:
    """Samples the running process on ITIMER_VIRTUAL expiry.

    Must be started from the main thread (signal handlers can only be
    installed there).
    """

    def __init__(
        self,
        attributor: CpuAttributor,
        quantum_seconds: float = 0.01,
        deferred: bool = False,
        sink: Optional[Callable[[TimerSample], None]] = None,
        profiled: Callable[[str], bool] = is_profiled_file,
    ) -> None:
        if quantum_seconds <= 0:
            raise ValueError("quantum_seconds must be > 0")
        self.attributor = attributor
        self.quantum_seconds = quantum_seconds
        self.quantum_ns = round(quantum_seconds * 1_000_000_000)
        self.deferred = deferred
        self._sink = sink
        self._profiled = profiled
        self._last_ns = 0
        self._pending = False
        self._busy = False
        self._active = False
        self._prev_handler = None
        self._main_thread_id = threading.main_thread().ident

    @property
    def active(self) -> bool:
        return self._active

    def start(self) -> None:
        if self._active:
            return
        if threading.current_thread() is not threading.main_thread():
            raise RuntimeError("CpuSampler must be started from the main thread")
        self._prev_handler = signal.signal(signal.SIGVTALRM, self._handle_signal)
        prev = signal.setitimer(signal.ITIMER_VIRTUAL, self.quantum_seconds, self.quantum_seconds)
        if prev != (0.0, 0.0):
            logger.warning("Replacing an existing ITIMER_VIRTUAL timer")
        self._last_ns = time.process_time_ns()
        self._active = True
        logger.info(f"CPU sampler started (q={self.quantum_seconds}s, deferred={self.deferred})")

    def stop(self) -> None:
        if not self._active:
            return
        signal.setitimer(signal.ITIMER_VIRTUAL, 0)
        if self._prev_handler is not None:
            signal.signal(signal.SIGVTALRM, self._prev_handler)
        self._active = False
        logger.info(f"CPU sampler stopped after {self.attributor.samples_seen} samples")

    @contextmanager
    def running(self) -> Iterator["CpuSampler"]:
        self.start()
        try:
            yield self
        finally:
            self.stop()

    def _handle_signal(self, signum: int, frame: Optional[FrameType]) -> None:
        if self.deferred:
            self._pending = True
            return
        self._take_sample(frame)

    def safepoint(self) -> bool:
        """Process a pending deferred sample at the caller's location.

        Returns:
            True if a sample was taken
        """
        if not self._pending:
            return False
        self._pending = False
        self._take_sample(sys._getframe(1))
        return True

    def _take_sample(self, frame: Optional[FrameType]) -> None:
        if self._busy:
            return
        self._busy = True
        try:
            now = time.process_time_ns()
            elapsed = max(now - self._last_ns, 0)
            self._last_ns = now
            sample = TimerSample(
                elapsed_ns=elapsed,
                quantum_ns=self.quantum_ns,
                main_stack=frame_to_stack(frame, self._profiled),
                thread_snapshots=self._snapshot_threads(),
            )
            self.attributor.on_timer_sample(sample)
            if self._sink is not None:
                self._sink(sample)
        except Exception:
            logger.error("Error in CPU sampler signal handler", exc_info=True)
        finally:
            self._busy = False

    def _snapshot_threads(self) -> Tuple[ThreadSnapshot, ...]:
        registry = self.attributor.registry
        snapshots: List[ThreadSnapshot] = []
        for ident, thread_frame in sys._current_frames().items():
            if ident == self._main_thread_id:
                continue
            snapshots.append(ThreadSnapshot(
                thread=ident,
                status=registry.status_of(ident),
                callsite=resolve_attribution(frame_to_stack(thread_frame, self._profiled)),
                in_call=registry.is_in_native(ident),
            ))
        return tuple(snapshots)


def set_thread_status(attributor: CpuAttributor, status: ThreadStatus, thread: Optional[int] = None) -> None:
    """Set a thread's status; defaults to the calling thread."""
    attributor.set_thread_status(thread if thread is not None else threading.get_ident(), status)


@contextmanager
def sleeping(attributor: CpuAttributor) -> Iterator[None]:
    """Mark the calling thread sleeping around a blocking call."""
    ident = threading.get_ident()
    attributor.set_thread_status(ident, ThreadStatus.SLEEPING)
    try:
        yield
    finally:
        attributor.set_thread_status(ident, ThreadStatus.EXECUTING)


@contextmanager
def native_section(attributor: CpuAttributor) -> Iterator[None]:
    """Mark the calling thread as executing a call into native code."""
    ident = threading.get_ident()
    attributor.registry.set_in_native(ident, True)
    try:
        yield
    finally:
        attributor.registry.set_in_native(ident, False)
