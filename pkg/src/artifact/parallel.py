"""Index-deterministic Monte-Carlo chunking.

Samples are split into chunks of fixed size; chunk ``i`` draws from
``SeedSequence(seed, spawn_key=(i,))``. Results are merged in chunk order, so the
output depends on the seed only, never on the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

CHUNK = 1000


def chunk_plan(n_items: int, chunk: int = CHUNK):
    return [(i, start, min(chunk, n_items - start)) for i, start in enumerate(range(0, n_items, chunk))]


def chunk_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def _call(args):
    fn, size, seed, index, stream, extra = args
    return fn(size, chunk_rng(seed, index, stream), *extra)


def run_chunks(fn, n_items: int, seed: int, extra=(), workers: int = 1, chunk: int = CHUNK,
               stream: int = 0) -> list:
    """Evaluate ``fn(size, rng, *extra)`` for every chunk; results in chunk order."""
    jobs = [(fn, size, seed, i, stream, tuple(extra)) for i, _, size in chunk_plan(n_items, chunk)]
    if workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_call, jobs))
