"""Deterministic chunked execution.

Path ``n`` is split into fixed-size chunks; chunk ``k`` draws its streams from
``SeedSequence(seed, spawn_key=(k,))``.  Results therefore depend only on the
seed and the chunk size, never on the number of workers or on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List

from .risk_model import RiskStreams


def chunk_sizes(n: int, chunk: int) -> List[int]:
    if n < 1 or chunk < 1:
        raise ValueError("n and chunk must be positive")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _run_one(worker: Callable, task: Any, seed: int, index: int, size: int):
    return worker(task, size, RiskStreams.from_seed(seed, index))


def run_chunks(worker: Callable, task: Any, n: int, chunk: int, seed: int,
               threads: int | None = 1) -> list:
    """Apply ``worker(task, size, streams)`` to every chunk, results in chunk order."""
    sizes = chunk_sizes(n, chunk)
    threads = threads or os.cpu_count() or 1
    if threads == 1 or len(sizes) == 1:
        return [_run_one(worker, task, seed, k, s) for k, s in enumerate(sizes)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_one, worker, task, seed, k, s) for k, s in enumerate(sizes)]
        return [f.result() for f in futures]
