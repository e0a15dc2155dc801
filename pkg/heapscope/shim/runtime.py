"""Live interposition layer.

``ShimRuntime`` sits between a program and an ``IAllocator``. Every
allocation, free and copy is forwarded unchanged; unless the calling
thread is already inside the profiler, the call also feeds the
threshold sampler, the leak detector and the copy-volume tracker, and
any sample produced is appended to the sample file.
"""

from __future__ import annotations

import logging
import sys
import threading
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterator, List, Optional

from heapscope.core.models import (
    UNKNOWN_CALLSITE,
    Callsite,
    DomainTag,
    ProfilerConfig,
    SampleKind,
    SampleRecord,
)
from heapscope.cpu.attributor import CpuAttributor, ThreadStatus
from heapscope.cpu.timer import CpuSampler
from heapscope.cpu.timer import native_section as _native_section
from heapscope.leaks.detector import LeakDetector
from heapscope.sampling.copy_volume import CopyVolumeTracker
from heapscope.sampling.threshold import ThresholdSampler
from heapscope.storage.samplefile import ISampleSink, SampleFileFooter, SampleFileHeader

from .allocators import IAllocator

logger = logging.getLogger(__name__)

AttributionHook = Callable[[], Optional[Callsite]]
SymbolMap = Callable[[Callsite], Optional[Callsite]]

_SHIM_PACKAGE = __name__.rsplit(".", 2)[0]


class ReentrancyGuard(threading.local):
    """Per-thread "inside profiler" flag.

    While set, interposed entry points forward straight to the
    allocator without sampling.
    """

    depth = 0

    @property
    def active(self) -> bool:
        return self.depth > 0

    def __enter__(self) -> "ReentrancyGuard":
        self.depth += 1
        return self

    def __exit__(self, *exc: object) -> None:
        self.depth -= 1


class DomainRegistration(threading.local):
    """Per-thread stack of active allocation domains (default native)."""

    def __init__(self) -> None:
        self.stack: List[DomainTag] = []

    def current(self) -> DomainTag:
        return self.stack[-1] if self.stack else DomainTag.NATIVE

    def push(self, tag: DomainTag) -> None:
        self.stack.append(tag)

    def pop(self) -> DomainTag:
        if not self.stack:
            raise RuntimeError("unbalanced domain pop")
        return self.stack.pop()


@dataclass
class ShimDiagnostics:
    """Instrumentation counters of a shim run.

    Updated under the runtime lock.
    """
    allocs: int = 0
    frees: int = 0
    copies: int = 0
    failed_allocs: int = 0
    internal_forwards: int = 0
    internal_records: int = 0
    unknown_frees: int = 0
    reused_addresses: int = 0
    records_written: int = 0
    write_failures: int = 0

    @property
    def events(self) -> int:
        """Sampled alloc, free and copy calls."""
        return self.allocs + self.frees + self.copies

    def as_dict(self) -> dict:
        return {**asdict(self), "events": self.events}


class ShimRuntime:
    """Sampling interposition over an allocator.

    Thread-safe: the guard and domain stack are per thread; sampler
    state is updated under one lock that is never held while the
    underlying allocator runs.
    """

    def __init__(
        self,
        config: ProfilerConfig,
        allocator: IAllocator,
        sink: Optional[ISampleSink] = None,
        attribution_hook: Optional[AttributionHook] = None,
        symbol_map: Optional[SymbolMap] = None,
        clock: Callable[[], int] = time.monotonic_ns,
    ) -> None:
        self.config = config
        self.allocator = allocator
        self.sink = sink
        self.attribution_hook = attribution_hook
        self.symbol_map = symbol_map
        self._clock = clock

        self.sampler = ThresholdSampler(config.threshold_bytes)
        self.leaks = LeakDetector()
        self.copies = CopyVolumeTracker(config.copy_rate_bytes, config.deterministic_rng_seed)
        # address -> size of live sampled allocations
        self._live: Dict[int, int] = {}
        self.cpu = CpuAttributor()
        self.cpu_sampler: Optional[CpuSampler] = None
        self.diagnostics = ShimDiagnostics()
        self.records: List[SampleRecord] = []

        self._guard = ReentrancyGuard()
        self._domains = DomainRegistration()
        self._lock = threading.Lock()
        self._finalized = False
        self._start_ns = clock()

        self._malloc = allocator.malloc
        self._free = allocator.free
        self._memcpy = allocator.memcpy
        self._note_alloc = self.sampler.note_alloc
        self._note_free = self.sampler.note_free

        if sink is not None:
            self._guarded_write(lambda: sink.write_header(SampleFileHeader(
                threshold=config.threshold_bytes,
                copy_rate=config.copy_rate_bytes,
                quantum_ns=config.quantum_ns,
                seed=config.deterministic_rng_seed,
                start_ns=self._start_ns,
            )))

    # -- scopes -----------------------------------------------------------

    @contextmanager
    def domain(self, tag: DomainTag) -> Iterator[None]:
        """Attribute allocations in this scope (this thread) to ``tag``."""
        self._domains.push(tag)
        try:
            yield
        finally:
            self._domains.pop()

    @contextmanager
    def internal(self) -> Iterator[None]:
        """Run profiler-internal code: interposed calls are forwarded unsampled."""
        with self._guard:
            yield

    @property
    def inside_profiler(self) -> bool:
        return self._guard.active

    @property
    def live_count(self) -> int:
        """Live sampled allocations in the side table."""
        return len(self._live)

    # -- attribution ------------------------------------------------------

    def _attribute(self) -> Callsite:
        if self.attribution_hook is not None:
            try:
                hooked = self.attribution_hook()
            except Exception:
                logger.error("Attribution hook failed", exc_info=True)
                hooked = None
            if hooked is not None:
                return hooked
        frame = sys._getframe(1)
        while frame is not None and frame.f_globals.get("__name__", "").startswith(_SHIM_PACKAGE + "."):
            frame = frame.f_back
        if frame is None:
            return UNKNOWN_CALLSITE
        raw = Callsite(frame.f_code.co_filename or UNKNOWN_CALLSITE.file, max(frame.f_lineno or 1, 1), frame.f_code.co_name)
        if self.symbol_map is not None:
            mapped = self.symbol_map(raw)
            if mapped is not None:
                return mapped
        return raw

    # -- emission ---------------------------------------------------------

    def _guarded_write(self, action: Callable[[], None]) -> bool:
        try:
            action()
            return True
        except (OSError, ValueError) as e:
            self.diagnostics.write_failures += 1
            logger.error(f"Sample file write failed: {e}")
            return False

    def _emit(self, record: SampleRecord) -> None:
        # Emission runs with the guard held exactly once by the entry point.
        if self._guard.depth != 1:
            self.diagnostics.internal_records += 1
        self.records.append(record)
        if self.sink is not None and self._guarded_write(lambda: self.sink.write_record(record)):
            self.diagnostics.records_written += 1

    # -- interposed entry points ------------------------------------------
    #
    # Without a crossing or a tracked-address hit a call costs one lock
    # round trip and counter arithmetic. Attribution and file writes happen
    # only on emission.

    def interposed_alloc(self, size: int) -> Optional[int]:
        """Allocate through the underlying allocator, sampling when unguarded."""
        address = self._malloc(size)
        if not address:
            with self._lock:
                self.diagnostics.failed_allocs += 1
            return address
        if self._guard.depth:
            with self._lock:
                self.diagnostics.internal_forwards += 1
            return address
        stack = self._domains.stack
        managed = bool(stack) and stack[-1] is DomainTag.MANAGED
        with self._lock:
            self.diagnostics.allocs += 1
            live = self._live
            replaced = live.get(address)
            live[address] = size
            if replaced is not None:
                # The previous block at this address was freed out of sight.
                self.diagnostics.reused_addresses += 1
                self._account_free(address, replaced)
            if self._note_alloc(size, managed):
                with self._guard:
                    record = self.sampler.emit(self._attribute(), address, self._clock())
                    self.leaks.on_growth_sample(record)
                    self._emit(record)
        return address

    def interposed_free(self, address: int) -> None:
        """Free through the underlying allocator, sampling when unguarded."""
        if not address:
            return
        if self._guard.depth:
            with self._lock:
                self.diagnostics.internal_forwards += 1
            self._free(address)
            return
        with self._lock:
            self.diagnostics.frees += 1
            size = self._live.pop(address, None)
            if size is None:
                self.diagnostics.unknown_frees += 1
                size = 0
            self._account_free(address, size)
        self._free(address)

    def _account_free(self, address: int, size: int) -> None:
        # Caller holds the lock.
        crossed = self._note_free(size)
        tracked = self.leaks.tracked
        if self.leaks.on_free(address) and tracked is not None:
            state = self.sampler.state
            with self._guard:
                self._emit(SampleRecord(
                    kind=SampleKind.RECLAIM,
                    timestamp=self._clock(),
                    net_delta=-size,
                    footprint=max(state.footprint, 0),
                    peak_footprint=max(state.peak_footprint, state.footprint, 0),
                    managed_fraction=0.0,
                    callsite=tracked.callsite,
                    alloc_id=address,
                ))
        if crossed:
            with self._guard:
                self._emit(self.sampler.emit(self._attribute(), address, self._clock()))

    def interposed_copy(self, dst: int, src: int, n: int) -> int:
        """Copy through the underlying allocator, feeding copy-volume sampling."""
        result = self._memcpy(dst, src, n)
        if self._guard.depth:
            with self._lock:
                self.diagnostics.internal_forwards += 1
            return result
        stack = self._domains.stack
        managed = bool(stack) and stack[-1] is DomainTag.MANAGED
        with self._lock:
            self.diagnostics.copies += 1
            now = self._clock()
            emitted = self.copies.note_copy(n, now)
            if emitted:
                state = self.sampler.state
                with self._guard:
                    self._emit(self.copies.credit(
                        emitted, self._attribute(), now,
                        footprint=max(state.footprint, 0),
                        peak_footprint=state.peak_footprint,
                        managed=managed,
                    ))
        return result

    # -- CPU entry points -------------------------------------------------

    def start_cpu_sampling(self, deferred: bool = False, sink: Optional[Callable] = None) -> CpuSampler:
        """Arm the virtual-time CPU sampler (main thread only)."""
        if self.cpu_sampler is None:
            self.cpu_sampler = CpuSampler(self.cpu, self.config.quantum_seconds, deferred=deferred, sink=sink)
        self.cpu_sampler.start()
        return self.cpu_sampler

    def safepoint(self) -> bool:
        """Process a pending deferred CPU sample; embedders call this in hot loops."""
        if self.cpu_sampler is None:
            return False
        return self.cpu_sampler.safepoint()

    def set_thread_status(self, status: ThreadStatus, thread: Optional[int] = None) -> None:
        self.cpu.set_thread_status(thread if thread is not None else threading.get_ident(), status)

    def native_section(self):
        """Context manager marking the calling thread as inside native code."""
        return _native_section(self.cpu)

    # -- shutdown ---------------------------------------------------------

    def flush_and_finalize(self) -> Optional[SampleFileFooter]:
        """Seal the sample file with a totals footer. Idempotent, never raises."""
        if self._finalized:
            return None
        self._finalized = True
        if self.cpu_sampler is not None and self.cpu_sampler.active:
            try:
                self.cpu_sampler.stop()
            except Exception:
                logger.error("Failed to stop CPU sampler", exc_info=True)
        with self._guard, self._lock:
            state = self.sampler.state
            footer = SampleFileFooter(
                events=self.diagnostics.events,
                allocs=self.diagnostics.allocs,
                frees=self.diagnostics.frees,
                copies=self.diagnostics.copies,
                samples=len(self.records),
                peak=state.peak_footprint,
                elapsed_ns=max(self._clock() - self._start_ns, 0),
            )
            if self.sink is not None:
                self._guarded_write(lambda: self.sink.write_footer(footer))
                self._guarded_write(self.sink.close)
        logger.info(f"Sample file sealed: {footer.samples} samples, peak {footer.peak} bytes")
        return footer
