# Core module
"""Shared vocabulary: callsites, events, samples, configuration and footprint accounting."""

from .models import (
    MIB,
    FOREIGN_CALLSITE,
    UNKNOWN_CALLSITE,
    DEFAULT_THRESHOLD_BYTES,
    Callsite,
    DomainTag,
    EventKind,
    SampleKind,
    AllocEvent,
    SampleRecord,
    FootprintPoint,
    LeakEstimator,
    ProfilerConfig,
    is_prime,
    next_prime,
)
from .validation import (
    FootprintLedger,
    EventStreamValidator,
    ViolationReason,
    ValidationResult,
    validate_event_stream,
)

__all__ = [
    "MIB",
    "FOREIGN_CALLSITE",
    "UNKNOWN_CALLSITE",
    "DEFAULT_THRESHOLD_BYTES",
    "Callsite",
    "DomainTag",
    "EventKind",
    "SampleKind",
    "AllocEvent",
    "SampleRecord",
    "FootprintPoint",
    "LeakEstimator",
    "ProfilerConfig",
    "is_prime",
    "next_prime",
    "FootprintLedger",
    "EventStreamValidator",
    "ViolationReason",
    "ValidationResult",
    "validate_event_stream",
]
