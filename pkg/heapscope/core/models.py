"""Data models shared by every profiler component."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

MIB = 2**20

FOREIGN_FILE = "<foreign>"
UNKNOWN_FILE = "<unknown>"


@dataclass(frozen=True, slots=True, order=True)
class Callsite:
    """Source location to which all metrics accrue.

    Attributes:
        file: Source file path (any language)
        line: 1-based line number
        function: Optional enclosing function name; not part of identity
    """
    file: str
    line: int
    function: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.file:
            raise ValueError("Callsite file must be non-empty")
        if self.line < 1:
            raise ValueError(f"Callsite line must be >= 1, got {self.line}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}"


FOREIGN_CALLSITE = Callsite(FOREIGN_FILE, 1)
UNKNOWN_CALLSITE = Callsite(UNKNOWN_FILE, 1)


class DomainTag(Enum):
    """Which allocator domain an allocation belongs to."""
    MANAGED = "managed"
    NATIVE = "native"


class EventKind(Enum):
    """Allocator action recorded by the shim or a trace."""
    ALLOC = "alloc"
    FREE = "free"
    COPY = "copy"


class SampleKind(Enum):
    """Kind of record written to the sample file."""
    GROWTH = "growth"
    DECLINE = "decline"
    COPY = "copy"
    RECLAIM = "reclaim"


@dataclass(frozen=True, slots=True)
class AllocEvent:
    """One allocator action.

    Attributes:
        kind: alloc, free or copy
        size: Bytes; for frees, the size recorded at the matching alloc
        alloc_id: Opaque identifier, unique among live allocations (0 for copies)
        domain: Managed or native allocator domain
        callsite: Attribution of the event
        timestamp: Monotonic nanoseconds
        thread: Thread identifier
    """
    kind: EventKind
    size: int
    alloc_id: int
    domain: DomainTag
    callsite: Callsite
    timestamp: int
    thread: int = 0


@dataclass(frozen=True, slots=True)
class SampleRecord:
    """One emitted sample; the unit written to the sample file.

    Attributes:
        kind: growth, decline, copy (or reclaim for leak bookkeeping)
        timestamp: Emission time in nanoseconds
        net_delta: Allocated minus freed bytes since last reset; copied bytes for copies
        footprint: Live bytes at emission
        peak_footprint: Highest footprint so far
        managed_fraction: Share of allocated bytes in the managed domain
        callsite: Attribution of the triggering event
        alloc_id: Identifier of the triggering allocation (None for copies)
    """
    kind: SampleKind
    timestamp: int
    net_delta: int
    footprint: int
    peak_footprint: int
    managed_fraction: float
    callsite: Callsite
    alloc_id: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.managed_fraction <= 1.0:
            raise ValueError(f"managed_fraction out of range: {self.managed_fraction}")
        if self.footprint > self.peak_footprint:
            raise ValueError("footprint cannot exceed peak_footprint")


@dataclass(frozen=True, slots=True)
class FootprintPoint:
    """A (timestamp, footprint) point of the memory trend."""
    timestamp: int
    footprint: int


class LeakEstimator(Enum):
    """Which Rule-of-Succession variant scores leaks.

    PRINTED uses ``1 - (frees + 1) / (mallocs - frees + 2)``;
    LAPLACE uses the textbook ``1 - (frees + 1) / (mallocs + 2)``.
    """
    PRINTED = "printed"
    LAPLACE = "laplace"


def is_prime(n: int) -> bool:
    """Trial-division primality test over 6k +/- 1 candidates."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0 or n % 3 == 0:
        return False
    k = 5
    while k * k <= n:
        if n % k == 0 or n % (k + 2) == 0:
            return False
        k += 6
    return True


def next_prime(base: int) -> int:
    """Return the smallest prime >= base."""
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    n = base
    while not is_prime(n):
        n += 1
    return n


DEFAULT_THRESHOLD_BYTES = next_prime(10 * MIB)
DEFAULT_QUANTUM_SECONDS = 0.01
DEFAULT_COPY_RATE_MULTIPLE = 2
DEFAULT_TICK_NS = 1_000_000


@dataclass
class ProfilerConfig:
    """Profiler settings.

    Attributes:
        threshold_bytes: Prime sampling threshold T
        quantum_seconds: CPU timer interval q
        copy_rate_multiple: Copy sampling rate as a multiple of T
        output_path: Sample file path
        deterministic_rng_seed: Seed for rate sampling; None draws fresh entropy
        leak_estimator: Leak probability variant
        tick_ns: Synthetic replay clock tick
    """
    threshold_bytes: int = DEFAULT_THRESHOLD_BYTES
    quantum_seconds: float = DEFAULT_QUANTUM_SECONDS
    copy_rate_multiple: int = DEFAULT_COPY_RATE_MULTIPLE
    output_path: str = "heapscope.samples"
    deterministic_rng_seed: Optional[int] = None
    leak_estimator: LeakEstimator = LeakEstimator.PRINTED
    tick_ns: int = DEFAULT_TICK_NS

    def __post_init__(self) -> None:
        if self.threshold_bytes < 2 or not is_prime(self.threshold_bytes):
            raise ValueError(f"threshold_bytes must be prime, got {self.threshold_bytes}")
        if self.quantum_seconds <= 0:
            raise ValueError("quantum_seconds must be > 0")
        if self.copy_rate_multiple < 1:
            raise ValueError("copy_rate_multiple must be >= 1")
        if self.tick_ns < 1:
            raise ValueError("tick_ns must be >= 1")
        if self.deterministic_rng_seed is not None and self.deterministic_rng_seed < 0:
            raise ValueError(f"deterministic_rng_seed must be >= 0, got {self.deterministic_rng_seed}")

    @property
    def copy_rate_bytes(self) -> int:
        """R_copy: bytes per expected copy sample."""
        return self.copy_rate_multiple * self.threshold_bytes

    @property
    def quantum_ns(self) -> int:
        return round(self.quantum_seconds * 1_000_000_000)
