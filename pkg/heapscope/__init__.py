"""heapscope: sampling CPU and memory profiler."""

from heapscope.core import Callsite, DomainTag, ProfilerConfig
from heapscope.errors import HeapscopeError

__version__ = "0.1.0"

__all__ = ["Callsite", "DomainTag", "ProfilerConfig", "HeapscopeError", "__version__"]
