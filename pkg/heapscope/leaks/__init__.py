# Leaks module
"""Leak scoring, probability estimation and report filtering."""

from .detector import (
    LeakScore,
    TrackedAllocation,
    LeakReportEntry,
    LeakDetector,
    leak_probability,
    growth_slope,
    leak_rate,
    filter_leak_reports,
)

__all__ = [
    "LeakScore",
    "TrackedAllocation",
    "LeakReportEntry",
    "LeakDetector",
    "leak_probability",
    "growth_slope",
    "leak_rate",
    "filter_leak_reports",
]
