"""Counter-based random streams.

Every stream is a Philox generator whose 128-bit key packs ``(seed, index)``.
Streams with different indices are independent by construction, so work can be
split into fixed chunks and run in any order or on any number of workers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
DEFAULT_CHUNK = 1 << 16


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not (0 <= seed <= _MASK64):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for sub-stream ``index`` of ``seed``."""
    index = int(index)
    if not (0 <= index <= _MASK64):
        raise ValueError(f"stream index out of range: {index}")
    return np.random.Generator(np.random.Philox(key=check_seed(seed) | (index << 64)))


def chunks(trials: int, chunk_size: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    """``(chunk_index, size)`` pairs covering ``trials``; independent of worker count."""
    if trials < 0:
        raise ValueError("trials must be non-negative")
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    full, rest = divmod(trials, chunk_size)
    out = [(k, chunk_size) for k in range(full)]
    if rest:
        out.append((full, rest))
    return out
