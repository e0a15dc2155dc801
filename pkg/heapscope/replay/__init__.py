# Replay module
"""Synthetic traces and deterministic threshold vs rate replay."""

from .generators import TraceGenerator, TraceSpec, generate_trace, iter_trace_spec
from .lab import ReplayResult, compare_log_sizes, render_logs, replay

__all__ = [
    "TraceGenerator",
    "TraceSpec",
    "generate_trace",
    "iter_trace_spec",
    "ReplayResult",
    "compare_log_sizes",
    "render_logs",
    "replay",
]
