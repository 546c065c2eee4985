"""Seed derivation and an order-preserving thread map.

Every random trial draws from its own generator keyed by ``(seed, stream,
index)``, so results do not depend on how trials are scheduled.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

from .errors import InvalidParameters

T = TypeVar("T")
R = TypeVar("R")

# independent random streams
STREAM_TRIALS = 0
STREAM_PRESCREEN = 1
STREAM_CANDIDATES = 2
STREAM_SIMULATION = 3


def trial_rng(seed: int, index: int, stream: int = STREAM_TRIALS) -> np.random.Generator:
    if seed < 0:
        raise InvalidParameters(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(stream, int(index))))


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit ``threads`` wins, then ``FRAMECODE_THREADS``; 0 means all CPUs."""
    if threads is None:
        raw = os.environ.get("FRAMECODE_THREADS", "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise InvalidParameters(f"FRAMECODE_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise InvalidParameters(f"thread count must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def chunks(n: int, size: int) -> List[range]:
    return [range(lo, min(lo + size, n)) for lo in range(0, n, size)]


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """``list(map(fn, items))``, optionally spread over a thread pool."""
    workers = min(resolve_threads(threads), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def flatten(parts: Iterable[Iterable[T]]) -> List[T]:
    return [x for part in parts for x in part]
