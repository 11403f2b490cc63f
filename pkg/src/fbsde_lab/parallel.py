"""Fixed-size path blocks.

Work is always cut into the same blocks (``BLOCK_PATHS`` paths each) and
results are combined in block order, so outputs depend only on the block size,
never on how many workers process the blocks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple, TypeVar

T = TypeVar("T")

BLOCK_PATHS = 16384


def path_blocks(n: int, size: int = BLOCK_PATHS) -> List[Tuple[int, int]]:
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def map_blocks(fn: Callable[[int, int], T], n: int, workers: int = 1, size: int = BLOCK_PATHS) -> List[T]:
    """Apply ``fn(start, stop)`` to every block; results are returned in block order."""
    blocks = path_blocks(n, size)
    if workers <= 1 or len(blocks) <= 1:
        return [fn(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, a, b) for a, b in blocks]
        return [fut.result() for fut in futures]
