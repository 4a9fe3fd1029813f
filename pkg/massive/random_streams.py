"""
Named random streams and order-independent Monte Carlo reduction.

All randomness in the toolkit flows from one scenario seed. Each consumer
asks for a stream by (module, purpose), so adding a new consumer never
perturbs the numbers an existing one sees. Large Monte Carlo workloads are
split into fixed-size chunks with spawned child seeds; because the chunk
layout does not depend on the number of workers and partial sums are reduced
with ``math.fsum``, results are bit-identical for any worker count.
"""
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple

import numpy as np

DEFAULT_CHUNK = 256


def _purpose_words(module: str, purpose: str) -> List[int]:
    digest = hashlib.sha256(f"{module}/{purpose}".encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def seed_sequence(seed: int, module: str, purpose: str) -> np.random.SeedSequence:
    """SeedSequence for one named stream derived from the scenario seed."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_purpose_words(module, purpose)])


def named_stream(seed: int, module: str, purpose: str) -> np.random.Generator:
    """Independent generator for (module, purpose) under the scenario seed."""
    return np.random.default_rng(seed_sequence(seed, module, purpose))


def chunk_layout(n_items: int, chunk: int = DEFAULT_CHUNK) -> List[Tuple[int, int]]:
    """(start, size) pairs covering n_items in fixed-size chunks."""
    return [(start, min(chunk, n_items - start)) for start in range(0, n_items, chunk)]


def chunk_streams(
    seed: int,
    module: str,
    purpose: str,
    n_items: int,
    chunk: int = DEFAULT_CHUNK,
) -> List[Tuple[int, np.random.Generator]]:
    """
    One child generator per chunk of a Monte Carlo workload.

    Returns:
        List of (chunk_size, generator) in chunk order
    """
    layout = chunk_layout(n_items, chunk)
    children = seed_sequence(seed, module, purpose).spawn(len(layout))
    return [(size, np.random.default_rng(child)) for (_, size), child in zip(layout, children)]


def map_chunks(
    worker: Callable[[int, np.random.Generator], Sequence[float]],
    streams: List[Tuple[int, np.random.Generator]],
    workers: int = 1,
) -> List[Sequence[float]]:
    """
    Evaluate ``worker(size, rng)`` for each chunk, optionally on a thread pool.

    Output order always follows chunk order.
    """
    if workers <= 1 or len(streams) <= 1:
        return [worker(size, rng) for size, rng in streams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: worker(*item), streams))


def stable_sum(parts: Sequence[Sequence[float]], column: int) -> float:
    """Correctly rounded sum of one column of per-chunk partial sums."""
    return math.fsum(part[column] for part in parts)
