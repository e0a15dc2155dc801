# Shim module
"""Allocator interposition: sampling runtime, allocators and launcher."""

from .allocators import IAllocator, LibcAllocator, PoolAllocator
from .runtime import DomainRegistration, ReentrancyGuard, ShimDiagnostics, ShimRuntime
from .launcher import current, free, install, malloc, memcpy, run_script, uninstall

__all__ = [
    "IAllocator",
    "LibcAllocator",
    "PoolAllocator",
    "DomainRegistration",
    "ReentrancyGuard",
    "ShimDiagnostics",
    "ShimRuntime",
    "current",
    "free",
    "install",
    "malloc",
    "memcpy",
    "run_script",
    "uninstall",
]
