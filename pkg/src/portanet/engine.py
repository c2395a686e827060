"""Backend-switchable parallel kernel launcher.

Every numeric kernel in the package is a *block kernel*: a function
``kernel(lo, hi, *arrays, *scalars)`` that processes the indices (or matrix
rows) ``lo .. hi-1``. The engine splits ``[0, n)`` into contiguous blocks
according to the active :class:`Policy` and runs each block exactly once,
either inline (sequential) or on a pool of worker threads.

Kernels are compiled with numba in ``nogil`` mode so worker threads really run
concurrently. Because each output element is produced by one invocation with a
fixed internal loop order, results are bitwise identical for every policy.
"""

from __future__ import annotations

import functools
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .errors import ContractError, EngineError, ShapeError

log = logging.getLogger(__name__)

THREADS_ENV = "PORTANET_THREADS"
DEBUG_ENV = "PORTANET_DEBUG"

SEQUENTIAL = "sequential"
MULTITHREADED = "multithreaded"


def kernel(fn: Callable) -> Callable:
    """Compile a block kernel. Bounds checks are on only when PORTANET_DEBUG is set."""
    debug = os.environ.get(DEBUG_ENV, "") not in ("", "0")
    return numba.njit(nogil=True, cache=not debug, boundscheck=debug)(fn)


def default_threads() -> int:
    """Thread count from ``PORTANET_THREADS``, else the hardware concurrency."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n < 1:
            raise ContractError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Policy:
    kind: str = SEQUENTIAL
    threads: int = 1

    def __post_init__(self):
        if self.kind not in (SEQUENTIAL, MULTITHREADED):
            raise ContractError(f"unknown policy kind {self.kind!r}")
        if self.threads < 1:
            raise ContractError(f"threads must be >= 1, got {self.threads}")

    @classmethod
    def sequential(cls) -> "Policy":
        return cls()

    @classmethod
    def multithreaded(cls, threads: Optional[int] = None) -> "Policy":
        return cls(MULTITHREADED, default_threads() if threads is None else int(threads))

    def __str__(self) -> str:
        if self.kind == SEQUENTIAL:
            return "sequential"
        return f"multithreaded({self.threads})"


class _EngineState:
    def __init__(self):
        self.policy = Policy()
        self.active = 0
        self.lock = threading.Lock()
        self.pools: dict[int, ThreadPoolExecutor] = {}

    def pool(self, threads: int) -> ThreadPoolExecutor:
        with self.lock:
            pool = self.pools.get(threads)
            if pool is None:
                pool = ThreadPoolExecutor(threads, thread_name_prefix="portanet")
                self.pools[threads] = pool
            return pool


_state = _EngineState()


def get_policy() -> Policy:
    return _state.policy


def set_policy(policy: Policy) -> None:
    if _state.active:
        raise ContractError("cannot change the policy while a parallel region is active")
    _state.policy = policy
    log.debug("engine policy set to %s", policy)


@contextmanager
def use_policy(policy: Policy):
    previous = get_policy()
    set_policy(policy)
    try:
        yield policy
    finally:
        set_policy(previous)


def partition(n: int, threads: int) -> list[tuple[int, int]]:
    """Contiguous blocks of size ceil(n / threads) covering [0, n)."""
    if n <= 0:
        return []
    chunk = -(-n // threads)
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def _check_disjoint(outputs: Sequence, inputs: Sequence) -> None:
    outs = [a for a in outputs if isinstance(a, np.ndarray)]
    ins = [a for a in inputs if isinstance(a, np.ndarray)]
    for i, a in enumerate(outs):
        for b in outs[i + 1:]:
            if np.may_share_memory(a, b):
                raise ContractError("kernel output regions overlap")
        for b in ins:
            if np.may_share_memory(a, b):
                raise ContractError("kernel input aliases a kernel output")


def _launch(n, fn, call_args, outputs, inputs, policy):
    policy = policy or _state.policy
    _check_disjoint(outputs, inputs)
    blocks = partition(n, 1 if policy.kind == SEQUENTIAL else policy.threads)
    if not blocks:
        return
    _state.active += 1
    try:
        if policy.kind == SEQUENTIAL:
            fn(0, n, *call_args)
        else:
            pool = _state.pool(policy.threads)
            futures = [pool.submit(fn, lo, hi, *call_args) for lo, hi in blocks]
            errors = []
            for f in futures:
                exc = f.exception()
                if exc is not None:
                    errors.append(exc)
            if errors:
                raise errors[0]
    except ContractError:
        raise
    except Exception as exc:
        raise EngineError(f"kernel {getattr(fn, '__name__', fn)!s} failed: {exc}") from exc
    finally:
        _state.active -= 1


def for_each_index(n: int, fn: Callable, *, outputs: Sequence = (), inputs: Sequence = (),
                   args: Sequence = (), policy: Optional[Policy] = None) -> None:
    """Run ``fn(lo, hi, *outputs, *inputs, *args)`` so every index in [0, n) is covered once."""
    _launch(int(n), fn, (*outputs, *inputs, *args), outputs, inputs, policy)


def for_each_row(m, fn: Callable, *, outputs: Sequence = (), inputs: Sequence = (),
                 args: Sequence = (), policy: Optional[Policy] = None) -> None:
    """Run ``fn(lo, hi, m, *outputs, *inputs, *args)`` once per row of matrix ``m``.

    A kernel owns the rows it is handed and may write them in place.
    """
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ShapeError(f"for_each_row needs a matrix, got shape {arr.shape}")
    _launch(arr.shape[0], fn, (arr, *outputs, *inputs, *args), (arr, *outputs), inputs, policy)


def per_index(fn: Callable) -> Callable:
    """Adapt ``fn(i, *rest)`` into a block kernel (pure Python, for small jobs and tests)."""

    @functools.wraps(fn)
    def block(lo, hi, *rest):
        for i in range(lo, hi):
            fn(i, *rest)

    return block


def per_row(fn: Callable) -> Callable:
    """Adapt ``fn(row, *rest)`` into a row block kernel; ``row`` is a writable view."""

    @functools.wraps(fn)
    def block(lo, hi, m, *rest):
        for i in range(lo, hi):
            fn(m[i], *rest)

    return block
