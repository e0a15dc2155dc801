"""Classical rate-based byte sampling.

Each byte is a Bernoulli trial with probability ``1/R``; a geometric
countdown gives the same sample positions without a per-byte draw. Used
as the baseline in replay comparisons and as the copy-volume engine.

Deterministic mode (no RNG) resets the countdown to exactly R. It is
not uniform sampling and exists for reproducible tests only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from heapscope.core.models import Callsite

RngLike = Union[None, int, np.random.Generator]


@dataclass(frozen=True)
class SampleMeta:
    """Attribution carried alongside a byte count."""
    callsite: Callsite
    timestamp: int


@dataclass
class RateSamplerState:
    """Countdown state of one rate sampler.

    Attributes:
        rate: R, bytes per expected sample
        countdown: Bytes remaining until the next sampled byte (always > 0 between calls)
        rng: Seeded generator; None means deterministic mode
        samples_emitted: Total samples so far
        last_trigger: Attribution of the most recent triggering call
    """
    rate: int
    countdown: int
    rng: Optional[np.random.Generator] = None
    samples_emitted: int = 0
    last_trigger: Optional[SampleMeta] = field(default=None, compare=False)

    @property
    def deterministic(self) -> bool:
        return self.rng is None


def _as_generator(rng: RngLike) -> Optional[np.random.Generator]:
    if rng is None or isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _draw(state: RateSamplerState) -> int:
    if state.rng is None:
        return state.rate
    return int(state.rng.geometric(1.0 / state.rate))


def init_countdown(rate: int, rng: RngLike = None) -> RateSamplerState:
    """Create a rate sampler state.

    Args:
        rate: Bytes per expected sample (R >= 1)
        rng: Seed or numpy Generator for geometric draws; None for deterministic mode

    Returns:
        Fresh RateSamplerState

    Raises:
        ValueError: If rate < 1
    """
    if rate < 1:
        raise ValueError(f"rate must be >= 1, got {rate}")
    state = RateSamplerState(rate=rate, countdown=rate, rng=_as_generator(rng))
    state.countdown = _draw(state)
    return state


def record_bytes(state: RateSamplerState, n: int, meta: Optional[SampleMeta] = None) -> int:
    """Consume n bytes and return how many samples they trigger.

    A sample fires when the countdown reaches zero or below. Bytes left
    over after a trigger keep counting, so one large call may emit
    several samples.

    Raises:
        ValueError: If n < 0
    """
    if n < 0:
        raise ValueError(f"byte count must be >= 0, got {n}")
    remaining = state.countdown - n
    if remaining > 0:
        state.countdown = remaining
        return 0

    if state.rng is None:
        emitted = (-remaining) // state.rate + 1
        state.countdown = remaining + emitted * state.rate
    else:
        # Bytes past the first trigger are independent Bernoulli trials;
        # the next countdown is a fresh geometric draw (memoryless).
        emitted = 1 + int(state.rng.binomial(-remaining, 1.0 / state.rate))
        state.countdown = _draw(state)

    state.samples_emitted += emitted
    if meta is not None:
        state.last_trigger = meta
    return emitted


class RateSampler:
    """Object wrapper over RateSamplerState."""

    def __init__(self, rate: int, rng: RngLike = None) -> None:
        self.state = init_countdown(rate, rng)

    @property
    def rate(self) -> int:
        return self.state.rate

    @property
    def samples_emitted(self) -> int:
        return self.state.samples_emitted

    def record_bytes(self, n: int, meta: Optional[SampleMeta] = None) -> int:
        return record_bytes(self.state, n, meta)
