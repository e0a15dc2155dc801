from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from heapscope.core.models import LeakEstimator, MIB
from heapscope.errors import HeapscopeError
from heapscope.replay import TraceSpec, iter_trace_spec, replay
from heapscope.report import SORT_KEYS, aggregate, render_json, render_text
from heapscope.storage.tracefile import iter_trace, write_trace
from heapscope.util.env import config_from_env

logger = logging.getLogger("heapscope")

RUN_DESCRIPTION = """\
Run a Python script with the sampling shim installed.

CPU time is sampled for the whole script. Memory and copy samples come only
from calls routed through the shim: heapscope.shim.malloc, heapscope.shim.free
and heapscope.shim.memcpy, or a ShimRuntime driven by an embedding extension.
Allocations made by the interpreter or by other libraries are not seen, so a
script that never calls the shim produces a sample file with no memory records.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heapscope", description="Sampling CPU and memory profiler")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    report = sub.add_parser("report", help="Aggregate sample files into a profile")
    report.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="FILE", help="Sample files of one run")
    report.add_argument("--timer-log", help="Timer-sample log for the CPU columns")
    report.add_argument("--sort", default="cpu", choices=sorted(SORT_KEYS), help="Row order of the text table")
    report.add_argument("--json", dest="json_path", help="Also write the machine-readable profile here ('-' for stdout)")
    report.add_argument("--estimator", choices=[e.value for e in LeakEstimator], help="Leak probability variant")

    rep = sub.add_parser("replay", help="Replay a trace through threshold and rate samplers")
    source = rep.add_mutually_exclusive_group(required=True)
    source.add_argument("--trace", help="Trace file to replay")
    source.add_argument("--generate", metavar="SPEC", help="Generator spec, e.g. churn:pairs=1000,drift=1024")
    rep.add_argument("--threshold", type=int, help="Threshold in bytes (rounded up to a prime)")
    rep.add_argument("--seed", type=int, help="Seed for the rate sampler; omit for deterministic mode")
    rep.add_argument("--emit-json", action="store_true", help="Print the replay result as JSON")
    rep.add_argument("--save-trace", help="Write the generated trace to this file")

    run = sub.add_parser(
        "run",
        help="Run a Python script under the shim",
        description=RUN_DESCRIPTION,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    run.add_argument("--out", help="Sample file path")
    run.add_argument("--threshold", type=int, help="Threshold in bytes (rounded up to a prime)")
    run.add_argument("--timer-log", help="Write CPU timer samples here")
    run.add_argument("--no-cpu", action="store_true", help="Disable the CPU sampler")
    run.add_argument("script", help="Script to run")
    run.add_argument("args", nargs=argparse.REMAINDER, help="Script arguments")
    return parser


def _cmd_report(args: argparse.Namespace) -> int:
    estimator = LeakEstimator(args.estimator) if args.estimator else config_from_env().leak_estimator
    document = aggregate(args.inputs, timer_log=args.timer_log, estimator=estimator, sort_key=args.sort)
    sys.stdout.write(render_text(document, args.sort))
    if args.json_path == "-":
        sys.stdout.write(render_json(document))
    elif args.json_path:
        Path(args.json_path).write_text(render_json(document), encoding="utf-8")
        logger.info(f"Profile written to {args.json_path}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    config = config_from_env(threshold_bytes=args.threshold, deterministic_rng_seed=args.seed)
    if args.trace:
        events = iter_trace(args.trace)
    else:
        events = iter_trace_spec(TraceSpec.parse(args.generate), config.threshold_bytes)
        if args.save_trace:
            count = write_trace(args.save_trace, events)
            logger.info(f"Wrote {count} events to {args.save_trace}")
            events = iter_trace(args.save_trace)
    result = replay(events, config)
    if args.emit_json:
        sys.stdout.write(result.to_json() + "\n")
        return 0
    print(f"events               {result.event_count}")
    print(f"threshold            {config.threshold_bytes} B")
    print(f"threshold samples    {result.threshold_samples}")
    print(f"rate samples         {result.rate_samples}")
    print(f"rate/threshold       {result.sample_ratio:.1f}x")
    print(f"max recon error      {result.max_reconstruction_error} B")
    print(f"peak footprint       {result.peak_footprint / MIB:.3f} MB")
    for entry in result.leak_report:
        print(f"leak                 {entry.callsite} p={entry.probability:.4f} {entry.leak_rate:.3f} MB/s")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    from heapscope.shim.launcher import run_script

    config = config_from_env(output_path=args.out, threshold_bytes=args.threshold)
    script_args = args.args[1:] if args.args[:1] == ["--"] else args.args
    return run_script(args.script, script_args, config, timer_log=args.timer_log, cpu=not args.no_cpu)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"report": _cmd_report, "replay": _cmd_replay, "run": _cmd_run}
    try:
        return handlers[args.command](args)
    except (HeapscopeError, ValueError, OSError) as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
