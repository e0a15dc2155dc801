#!/usr/bin/env python3
"""
Allocation overhead benchmark for the sampling shim.

Runs the same small malloc/free loop against the C library allocator
directly and through ShimRuntime, then prints both timings and their ratio.
Exits non-zero when the ratio exceeds --max-ratio.

    python scripts/bench_overhead.py --ops 10000000
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import Callable, Optional

from heapscope.core import ProfilerConfig, next_prime
from heapscope.shim import LibcAllocator, ShimRuntime

logger = logging.getLogger("bench_overhead")

SIZES = (16, 32, 64, 128, 256)


def _time_loop(ops: int, malloc: Callable[[int], Optional[int]], free: Callable[[int], None]) -> float:
    """Seconds for ops alloc/free pairs."""
    sizes = SIZES
    n_sizes = len(sizes)
    start = time.perf_counter()
    for i in range(ops):
        address = malloc(sizes[i % n_sizes])
        if address:
            free(address)
    return time.perf_counter() - start


def run(ops: int, threshold: int) -> dict:
    allocator = LibcAllocator()
    baseline = _time_loop(ops, allocator.malloc, allocator.free)
    logger.info(f"direct: {ops} pairs in {baseline:.3f} s")

    runtime = ShimRuntime(ProfilerConfig(threshold_bytes=next_prime(threshold)), allocator)
    shimmed = _time_loop(ops, runtime.interposed_alloc, runtime.interposed_free)
    runtime.flush_and_finalize()
    logger.info(f"shim: {ops} pairs in {shimmed:.3f} s, {len(runtime.records)} records")

    return {
        "ops": ops,
        "threshold": runtime.config.threshold_bytes,
        "direct_s": round(baseline, 6),
        "shim_s": round(shimmed, 6),
        "ratio": round(shimmed / baseline, 3) if baseline > 0 else None,
        "records": len(runtime.records),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description="Measure shim overhead on small allocations")
    parser.add_argument("--ops", type=int, default=10_000_000, help="alloc/free pairs per run")
    parser.add_argument("--threshold", type=int, default=10 * 2**20, help="sampling threshold in bytes (rounded up to a prime)")
    parser.add_argument("--max-ratio", type=float, default=3.0, help="fail above this shim/direct ratio")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    result = run(args.ops, args.threshold)
    print(json.dumps(result, indent=2, sort_keys=True))
    if result["ratio"] is not None and result["ratio"] > args.max_ratio:
        logger.error(f"overhead ratio {result['ratio']} exceeds {args.max_ratio}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
