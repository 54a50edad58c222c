"""Chunked thread-pool mapping with deterministic output order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def default_workers() -> int:
    return os.cpu_count() or 1


def map_chunks(fn, n: int, workers: int = 1, min_chunk: int = 256):
    """Apply ``fn(rows)`` to contiguous row blocks of ``range(n)`` and concatenate.

    Blocks are independent, so results do not depend on ``workers``.
    """
    if workers <= 1 or n <= min_chunk:
        return fn(np.arange(n))
    n_chunks = min(workers * 2, max(1, n // min_chunk))
    blocks = np.array_split(np.arange(n), n_chunks)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, blocks))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p, axis=0) for p in zip(*parts))
    return np.concatenate(parts, axis=0)
