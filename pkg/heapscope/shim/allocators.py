"""Underlying allocators the shim forwards to."""

from __future__ import annotations

import ctypes
import ctypes.util
import logging
import threading
from abc import ABC, abstractmethod
from typing import Dict, Optional

logger = logging.getLogger(__name__)


class IAllocator(ABC):
    """Interface of an allocator the shim can interpose on.

    Addresses are plain integers; ``None`` (or 0) signals failure.
    """

    @abstractmethod
    def malloc(self, size: int) -> Optional[int]:
        """Allocate size bytes and return the address, or None on failure."""
        ...

    @abstractmethod
    def free(self, address: int) -> None:
        """Release an allocation."""
        ...

    @abstractmethod
    def memcpy(self, dst: int, src: int, n: int) -> int:
        """Copy n bytes from src to dst and return dst."""
        ...


class LibcAllocator(IAllocator):
    """The C library's malloc/free/memcpy bound through ctypes."""

    def __init__(self, libname: Optional[str] = None) -> None:
        name = libname or ctypes.util.find_library("c")
        self._libc = ctypes.CDLL(name)
        self._malloc = self._libc.malloc
        self._malloc.argtypes = [ctypes.c_size_t]
        self._malloc.restype = ctypes.c_void_p
        self._free = self._libc.free
        self._free.argtypes = [ctypes.c_void_p]
        self._free.restype = None
        self._memcpy = self._libc.memcpy
        self._memcpy.argtypes = [ctypes.c_void_p, ctypes.c_void_p, ctypes.c_size_t]
        self._memcpy.restype = ctypes.c_void_p

    def malloc(self, size: int) -> Optional[int]:
        return self._malloc(size)

    def free(self, address: int) -> None:
        self._free(address)

    def memcpy(self, dst: int, src: int, n: int) -> int:
        return self._memcpy(dst, src, n) or dst


class PoolAllocator(IAllocator):
    """Synthetic bump allocator for tests and stress runs.

    Hands out increasing 16-byte aligned addresses and never touches
    memory. With ``capacity`` set, requests beyond it fail.
    """

    ALIGN = 16

    def __init__(self, capacity: Optional[int] = None, base: int = 0x10000) -> None:
        self._capacity = capacity
        self._next = base
        self._live: Dict[int, int] = {}
        self._in_use = 0
        self._lock = threading.Lock()
        self.copies = 0
        self.bytes_copied = 0

    @property
    def in_use(self) -> int:
        return self._in_use

    def malloc(self, size: int) -> Optional[int]:
        with self._lock:
            if self._capacity is not None and self._in_use + size > self._capacity:
                return None
            address = self._next
            self._next += max(size, 1) + (-max(size, 1)) % self.ALIGN
            self._live[address] = size
            self._in_use += size
            return address

    def free(self, address: int) -> None:
        with self._lock:
            size = self._live.pop(address, None)
            if size is None:
                logger.debug(f"PoolAllocator: free of unknown address {address:#x}")
                return
            self._in_use -= size

    def memcpy(self, dst: int, src: int, n: int) -> int:
        with self._lock:
            self.copies += 1
            self.bytes_copied += n
        return dst
