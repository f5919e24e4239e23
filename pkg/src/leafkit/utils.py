"""Small shared helpers: seeding, worker caps, float formatting."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def rng_for(*keys) -> np.random.Generator:
    """Deterministic generator derived from a tuple of integer/str keys.

    Strings are folded to integers so that independent streams (e.g. the
    per-epoch shuffle vs. the per-epoch noise draw) never collide.
    """
    entropy = []
    for k in keys:
        if isinstance(k, str):
            entropy.append(int.from_bytes(k.encode("utf-8"), "little") % (2**63))
        else:
            entropy.append(int(k) % (2**63))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def max_workers() -> int:
    """Worker-thread cap, honouring the LEAFKIT_THREADS environment variable."""
    cap = os.environ.get("LEAFKIT_THREADS")
    if cap is not None:
        try:
            return max(1, int(cap))
        except ValueError:
            return 1
    return max(1, min(4, os.cpu_count() or 1))


def parallel_map(fn, items):
    """Order-preserving map, threaded when more than one worker is allowed.

    Results are collected in input order, so reductions over the output are
    deterministic regardless of scheduling.
    """
    items = list(items)
    n = max_workers()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def fmt_float(x) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))
