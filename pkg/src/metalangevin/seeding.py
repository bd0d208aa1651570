"""Seed derivation and per-replica Gaussian noise streams.

Every replica owns one PCG64 stream.  Its seed is derived from a base seed and
a tuple of integer keys through :class:`numpy.random.SeedSequence`, so
``derive_seed(seed, i)`` is stable across runs, platforms and worker counts.

Within a stream, iteration ``k`` consumes normals ``[k*d, (k+1)*d)`` in order.
Drawing the stream in chunks yields exactly the same variates as one big draw.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

UINT64_MASK = (1 << 64) - 1


def derive_seed(seed: int, *keys: int) -> int:
    """Return a 64-bit seed for the stream identified by ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed) & UINT64_MASK, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def make_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & UINT64_MASK))


def replica_seeds(seed: int, replicas: int, *prefix: int) -> list[int]:
    return [derive_seed(seed, *prefix, i) for i in range(replicas)]


class NoiseStreams:
    """Stacked standard-normal streams, one per replica.

    ``draw(c, width)`` returns an array of shape ``(c, R, width)`` whose slice
    ``[:, r, :]`` continues replica ``r``'s stream.
    """

    def __init__(self, seeds: Sequence[int]):
        self.seeds = [int(s) for s in seeds]
        self._gens = [make_stream(s) for s in self.seeds]

    def __len__(self) -> int:
        return len(self._gens)

    def draw(self, count: int, width: int) -> np.ndarray:
        out = np.empty((count, len(self._gens), width))
        for r, g in enumerate(self._gens):
            out[:, r, :] = g.standard_normal((count, width))
        return out


def map_replicas(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` preserving input order.

    With ``workers > 1`` a process pool is used; results are collected in
    submission order so the reduction never depends on completion order.
    ``fn`` must then be picklable (a module-level function or partial).
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
