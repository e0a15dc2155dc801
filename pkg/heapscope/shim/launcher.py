"""Process-global shim and the ``heapscope run`` launcher."""

from __future__ import annotations

import atexit
import logging
import runpy
import signal
import sys
import threading
from pathlib import Path
from typing import List, Optional, Sequence

from heapscope.core.models import ProfilerConfig
from heapscope.storage.samplefile import ISampleSink, SampleFileWriter
from heapscope.storage.timerlog import TimerLogWriter
from heapscope.util.env import config_from_env

from .allocators import IAllocator, LibcAllocator
from .runtime import ShimRuntime

logger = logging.getLogger(__name__)

_lock = threading.Lock()
_runtime: Optional[ShimRuntime] = None


def install(
    config: Optional[ProfilerConfig] = None,
    allocator: Optional[IAllocator] = None,
    sink: Optional[ISampleSink] = None,
    **kwargs,
) -> ShimRuntime:
    """Install the process-global shim.

    Defaults: configuration from HEAPSCOPE_* variables, the C library
    allocator, and a sample file at ``config.output_path``. The file is
    sealed at interpreter exit if nobody finalizes it first.

    Raises:
        RuntimeError: If a shim is already installed
    """
    global _runtime
    with _lock:
        if _runtime is not None:
            raise RuntimeError("heapscope shim already installed")
        config = config or config_from_env()
        allocator = allocator or LibcAllocator()
        if sink is None:
            sink = SampleFileWriter(config.output_path)
        runtime = ShimRuntime(config, allocator, sink, **kwargs)
        _runtime = runtime
    atexit.register(runtime.flush_and_finalize)
    logger.info(f"Shim installed (threshold={config.threshold_bytes}, out={config.output_path})")
    return runtime


def current() -> Optional[ShimRuntime]:
    return _runtime


def uninstall() -> None:
    """Seal and drop the process-global shim, if any."""
    global _runtime
    with _lock:
        runtime, _runtime = _runtime, None
    if runtime is not None:
        runtime.flush_and_finalize()
        atexit.unregister(runtime.flush_and_finalize)


def _require() -> ShimRuntime:
    runtime = _runtime
    if runtime is None:
        raise RuntimeError("heapscope shim is not installed")
    return runtime


def malloc(size: int) -> Optional[int]:
    return _require().interposed_alloc(size)


def free(address: int) -> None:
    _require().interposed_free(address)


def memcpy(dst: int, src: int, n: int) -> int:
    return _require().interposed_copy(dst, src, n)


def run_script(
    script: str | Path,
    argv: Sequence[str] = (),
    config: Optional[ProfilerConfig] = None,
    timer_log: Optional[str | Path] = None,
    cpu: bool = True,
) -> int:
    """Run a Python script under the shim and return its exit status.

    The shim (and, on the main thread where SIGVTALRM exists, the CPU
    sampler) is installed before the script's first statement and the
    sample file is sealed when it ends, however it ends.
    """
    config = config or config_from_env()
    runtime = install(config)
    writer: Optional[TimerLogWriter] = None
    if cpu and hasattr(signal, "SIGVTALRM") and threading.current_thread() is threading.main_thread():
        if timer_log is not None:
            writer = TimerLogWriter(timer_log, config.quantum_ns)
        runtime.start_cpu_sampling(sink=writer)
    elif cpu:
        logger.warning("CPU sampling unavailable here; profiling memory only")

    saved_argv: List[str] = sys.argv
    sys.argv = [str(script), *argv]
    status = 0
    try:
        runpy.run_path(str(script), run_name="__main__")
    except SystemExit as e:
        status = e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
    finally:
        sys.argv = saved_argv
        uninstall()
        if writer is not None:
            writer.close()
    return status
