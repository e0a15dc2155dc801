from __future__ import annotations

import pytest

from heapscope.core import Callsite, ProfilerConfig, next_prime

SMALL_THRESHOLD = 1009
MIB_THRESHOLD = next_prime(2**20)


@pytest.fixture
def small_config(tmp_path) -> ProfilerConfig:
    """Deterministic config with a small prime threshold."""
    return ProfilerConfig(threshold_bytes=SMALL_THRESHOLD, output_path=str(tmp_path / "run.samples"))


@pytest.fixture
def site_a() -> Callsite:
    return Callsite("app.py", 10, "work")


@pytest.fixture
def site_b() -> Callsite:
    return Callsite("lib/helpers.py", 42, "helper")


@pytest.fixture
def sample_path(tmp_path):
    return tmp_path / "run.samples"
