# Sampling module
"""Threshold, rate and copy-volume samplers."""

from .threshold import (
    ThresholdSamplerState,
    ThresholdSampler,
    choose_sampling_threshold,
    record_event,
    trend_series,
)
from .rate import (
    SampleMeta,
    RateSamplerState,
    RateSampler,
    init_countdown,
    record_bytes,
)
from .copy_volume import CopyStats, CopyVolumeTracker, copy_mbps

__all__ = [
    "ThresholdSamplerState",
    "ThresholdSampler",
    "choose_sampling_threshold",
    "record_event",
    "trend_series",
    "SampleMeta",
    "RateSamplerState",
    "RateSampler",
    "init_countdown",
    "record_bytes",
    "CopyStats",
    "CopyVolumeTracker",
    "copy_mbps",
]
