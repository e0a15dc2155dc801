from __future__ import annotations

import logging
import os
from typing import Any, Dict, Mapping, Optional

from heapscope.core.models import LeakEstimator, ProfilerConfig, next_prime

logger = logging.getLogger(__name__)

ENV_OUT = "HEAPSCOPE_OUT"
ENV_THRESHOLD = "HEAPSCOPE_THRESHOLD"
ENV_COPY_MULTIPLE = "HEAPSCOPE_COPY_MULTIPLE"
ENV_SEED = "HEAPSCOPE_SEED"
ENV_QUANTUM = "HEAPSCOPE_QUANTUM"
ENV_LEAK_ESTIMATOR = "HEAPSCOPE_LEAK_ESTIMATOR"


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _non_negative_int(raw: str) -> int:
    value = int(raw)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _positive_float(raw: str) -> float:
    value = float(raw)
    if not value > 0:
        raise ValueError("must be > 0")
    return value


def config_from_env(environ: Optional[Mapping[str, str]] = None, **overrides: Any) -> ProfilerConfig:
    """Build a ProfilerConfig from HEAPSCOPE_* variables.

    - HEAPSCOPE_THRESHOLD is rounded up to the next prime.
    - Malformed values are logged and the default is kept; never fatal.
    - Keyword overrides (e.g. CLI flags) win over the environment.
    """
    env = os.environ if environ is None else environ
    values: Dict[str, Any] = {}

    def take(name: str, key: str, convert) -> None:
        raw = env.get(name)
        if raw is None or raw.strip() == "":
            return
        try:
            values[key] = convert(raw.strip())
        except (ValueError, TypeError) as e:
            logger.warning(f"Ignoring {name}={raw!r}: {e}")

    take(ENV_OUT, "output_path", str)
    take(ENV_THRESHOLD, "threshold_bytes", lambda raw: next_prime(max(_positive_int(raw), 2)))
    take(ENV_COPY_MULTIPLE, "copy_rate_multiple", _positive_int)
    take(ENV_SEED, "deterministic_rng_seed", _non_negative_int)
    take(ENV_QUANTUM, "quantum_seconds", _positive_float)
    take(ENV_LEAK_ESTIMATOR, "leak_estimator", lambda raw: LeakEstimator(raw.lower()))

    values.update({k: v for k, v in overrides.items() if v is not None})
    if "threshold_bytes" in overrides and overrides["threshold_bytes"] is not None:
        values["threshold_bytes"] = next_prime(max(int(overrides["threshold_bytes"]), 2))
    return ProfilerConfig(**values)
