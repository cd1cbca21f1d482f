"""Counter-based random streams for reproducible shot sampling.

Shots are cut into fixed-size blocks. Block ``b`` of stream ``s`` under seed
``k`` draws from a Philox generator keyed by ``(k, s)`` whose counter starts
at ``b << 128``, so every block is a pure function of ``(seed, stream,
block)``. Totals therefore do not depend on how blocks are scheduled across
workers.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["BLOCK_SIZE", "block_generator", "block_sizes", "block_binomial", "binomial_count"]

BLOCK_SIZE = 1 << 16
_MASK64 = (1 << 64) - 1


def block_generator(seed, stream=0, block=0):
    """Independent generator for one block of one stream."""
    if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
        raise ValueError("seed and stream must be unsigned 64-bit integers")
    key = seed | (stream << 64)
    counter = np.array([0, 0, block, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def block_sizes(n):
    full, rest = divmod(int(n), BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def block_binomial(seed, stream, block, size, p):
    """Number of successes among ``size`` Bernoulli(p) trials of one block."""
    return int(block_generator(seed, stream, block).binomial(size, p))


def binomial_count(n, p, seed, stream=0, max_workers=None):
    """Successes among ``n`` Bernoulli(p) trials, reproducible for ``(seed, stream)``."""
    p = float(min(max(p, 0.0), 1.0))
    sizes = block_sizes(n)
    if max_workers and max_workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            parts = pool.map(lambda b: block_binomial(seed, stream, b, sizes[b], p),
                             range(len(sizes)))
            return sum(parts)
    return sum(block_binomial(seed, stream, b, size, p) for b, size in enumerate(sizes))
