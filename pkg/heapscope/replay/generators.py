"""Seeded synthetic allocation traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List

import numpy as np

from heapscope.core.models import DEFAULT_THRESHOLD_BYTES, AllocEvent, Callsite, DomainTag, EventKind

CHURN_SITE = Callsite("churn.py", 10, "churn")
DRIFT_SITE = Callsite("churn.py", 20, "drift")
STAIR_SITE = Callsite("staircase.py", 10, "step")
LEAK_SITE = Callsite("leak.py", 10, "leaky")
BACKGROUND_SITE = Callsite("leak.py", 20, "background")
RANDOM_SITES = (
    Callsite("random.py", 10, "a"),
    Callsite("random.py", 20, "b"),
    Callsite("random.py", 30, "c"),
)


class TraceGenerator(Enum):
    CHURN = "churn"
    STAIRCASE = "staircase"
    LEAK = "leak"
    RANDOM = "random"


# Parameter defaults; a value of None is filled in at generation time.
_DEFAULTS: Dict[TraceGenerator, Dict[str, Any]] = {
    TraceGenerator.CHURN: {"pairs": 1000, "size": 16 * 1024, "drift": 0, "drift_every": 100},
    TraceGenerator.STAIRCASE: {"steps": 5, "size": None},
    TraceGenerator.LEAK: {"n": 100, "size": 1024, "leak_fraction": 1.0, "background_size": 512, "seed": 0},
    TraceGenerator.RANDOM: {
        "events": 200, "max_size": 4096, "free_prob": 0.45, "copy_prob": 0.0, "managed_prob": 0.5, "seed": 0,
    },
}
_FLOAT_PARAMS = {"leak_fraction", "free_prob", "copy_prob", "managed_prob"}
_NON_NEGATIVE_PARAMS = {"drift", "seed", "pairs", "steps", "n", "events"}


@dataclass
class TraceSpec:
    """Which generator to run and with which parameters.

    Attributes:
        generator: churn, staircase, leak or random
        params: Generator-specific overrides of the defaults
    """
    generator: TraceGenerator
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.generator, TraceGenerator):
            self.generator = TraceGenerator(self.generator)
        known = _DEFAULTS[self.generator]
        unknown = set(self.params) - set(known)
        if unknown:
            raise ValueError(f"unknown {self.generator.value} parameters: {', '.join(sorted(unknown))}")
        for name, value in self.params.items():
            if value is None:
                continue
            if name in _FLOAT_PARAMS:
                if not 0.0 <= float(value) <= 1.0:
                    raise ValueError(f"{name} must be within [0, 1], got {value}")
            elif name in _NON_NEGATIVE_PARAMS:
                if int(value) < 0:
                    raise ValueError(f"{name} must be >= 0, got {value}")
            elif int(value) < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")

    def resolved(self, threshold: int = DEFAULT_THRESHOLD_BYTES) -> Dict[str, Any]:
        """Defaults merged with overrides; staircase size defaults to the threshold."""
        values = dict(_DEFAULTS[self.generator])
        values.update({k: v for k, v in self.params.items() if v is not None})
        if self.generator is TraceGenerator.STAIRCASE and values["size"] is None:
            values["size"] = threshold
        return values

    @classmethod
    def parse(cls, text: str) -> "TraceSpec":
        """Parse ``name[:key=value,...]``, e.g. ``churn:pairs=1000,drift=1024``.

        Raises:
            ValueError: On an unknown generator, parameter or malformed value
        """
        name, _, rest = text.strip().partition(":")
        try:
            generator = TraceGenerator(name.strip().lower())
        except ValueError:
            choices = ", ".join(g.value for g in TraceGenerator)
            raise ValueError(f"unknown generator '{name}' (choose from {choices})") from None
        params: Dict[str, Any] = {}
        for item in filter(None, (part.strip() for part in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"malformed parameter '{item}', expected key=value")
            key = key.strip()
            params[key] = float(value) if key in _FLOAT_PARAMS else int(value)
        return cls(generator, params)


def _churn(p: Dict[str, Any]) -> Iterator[AllocEvent]:
    alloc, free = EventKind.ALLOC, EventKind.FREE
    native = DomainTag.NATIVE
    size, drift, every = p["size"], p["drift"], p["drift_every"]
    next_id = 1
    clock = 0
    for pair in range(p["pairs"]):
        yield AllocEvent(alloc, size, next_id, native, CHURN_SITE, clock)
        yield AllocEvent(free, size, next_id, native, CHURN_SITE, clock + 1)
        next_id += 1
        clock += 2
        if drift and (pair + 1) % every == 0:
            yield AllocEvent(alloc, drift, next_id, native, DRIFT_SITE, clock)
            next_id += 1
            clock += 1


def _staircase(p: Dict[str, Any]) -> Iterator[AllocEvent]:
    for step in range(p["steps"]):
        yield AllocEvent(EventKind.ALLOC, p["size"], step + 1, DomainTag.NATIVE, STAIR_SITE, step)


def _leak(p: Dict[str, Any]) -> Iterator[AllocEvent]:
    rng = np.random.default_rng(p["seed"])
    leaked = rng.random(p["n"]) < p["leak_fraction"]
    size, background = p["size"], p["background_size"]
    next_id = 1
    clock = 0

    def event(kind: EventKind, nbytes: int, alloc_id: int, site: Callsite) -> AllocEvent:
        nonlocal clock
        clock += 1
        return AllocEvent(kind, nbytes, alloc_id, DomainTag.NATIVE, site, clock)

    for step in range(p["n"]):
        mine = next_id
        yield event(EventKind.ALLOC, size, mine, LEAK_SITE)
        yield event(EventKind.ALLOC, background, mine + 1, BACKGROUND_SITE)
        yield event(EventKind.FREE, background, mine + 1, BACKGROUND_SITE)
        if not leaked[step]:
            yield event(EventKind.FREE, size, mine, LEAK_SITE)
        next_id += 2


def _random(p: Dict[str, Any]) -> Iterator[AllocEvent]:
    rng = np.random.default_rng(p["seed"])
    live: List[tuple] = []
    next_id = 1
    for clock in range(p["events"]):
        draw = rng.random()
        site = RANDOM_SITES[int(rng.integers(len(RANDOM_SITES)))]
        domain = DomainTag.MANAGED if rng.random() < p["managed_prob"] else DomainTag.NATIVE
        if draw < p["copy_prob"]:
            yield AllocEvent(EventKind.COPY, int(rng.integers(1, p["max_size"] + 1)), 0, domain, site, clock)
        elif live and draw < p["copy_prob"] + p["free_prob"]:
            alloc_id, size, owner = live.pop(int(rng.integers(len(live))))
            yield AllocEvent(EventKind.FREE, size, alloc_id, domain, owner, clock)
        else:
            size = int(rng.integers(1, p["max_size"] + 1))
            live.append((next_id, size, site))
            yield AllocEvent(EventKind.ALLOC, size, next_id, domain, site, clock)
            next_id += 1


_GENERATORS = {
    TraceGenerator.CHURN: _churn,
    TraceGenerator.STAIRCASE: _staircase,
    TraceGenerator.LEAK: _leak,
    TraceGenerator.RANDOM: _random,
}


def iter_trace_spec(spec: TraceSpec, threshold: int = DEFAULT_THRESHOLD_BYTES) -> Iterator[AllocEvent]:
    """Lazily generate the events of a trace spec."""
    return _GENERATORS[spec.generator](spec.resolved(threshold))


def generate_trace(spec: TraceSpec, threshold: int = DEFAULT_THRESHOLD_BYTES) -> List[AllocEvent]:
    """Generate a valid, deterministic event sequence for a trace spec.

    Args:
        spec: Generator and parameters
        threshold: Staircase step size when the trace spec does not set one

    Returns:
        The events in emission order
    """
    return list(iter_trace_spec(spec, threshold))
