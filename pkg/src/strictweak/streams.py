"""Seeded random streams for replica-parallel Monte Carlo.

A master seed is split into independent Philox (counter-based) generators,
one per fixed-size block of replicas.  Block ``b`` of an experiment tagged
``tag`` always receives the stream keyed by ``SeedSequence(seed,
spawn_key=(tag, b))``, so results do not depend on how many worker threads
process the blocks or in which order they finish.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 2048

SCHEME = (
    "philox4x64 generators keyed by numpy SeedSequence(seed, spawn_key=(tag, block)); "
    f"replicas processed in blocks of {BLOCK_SIZE}"
)


def block_generator(seed: int, tag: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(tag), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(replicas: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(replicas), block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(
    func: Callable[[int, np.random.Generator], np.ndarray],
    replicas: int,
    seed: int,
    tag: int = 0,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Run ``func(size, rng)`` on every replica block and concatenate in order.

    ``func`` must return an array whose leading axis has length ``size``.
    """
    sizes = block_sizes(replicas, block_size)
    jobs = [(size, block_generator(seed, tag, b)) for b, size in enumerate(sizes)]
    if not jobs:
        return np.empty((0,))
    if threads <= 1 or len(jobs) == 1:
        parts: Sequence[np.ndarray] = [func(size, rng) for size, rng in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: func(*job), jobs))
    return np.concatenate(parts, axis=0)
