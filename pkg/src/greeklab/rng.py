"""Counter-based random streams.

Every random draw is addressed by (seed, stream name, block index), so the
numbers a path sees do not depend on batching or on how many other streams
were consumed first.
"""
from __future__ import annotations

import zlib

import numpy as np

BLOCK = 4096


def stream_key(seed: int, name: str = "") -> int:
    """64-bit key for the named sub-stream of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, np.uint64)[0])


def generator(seed: int, name: str = "", block: int = 0) -> np.random.Generator:
    """Philox generator for one block of one named stream."""
    return np.random.Generator(np.random.Philox(key=(stream_key(seed, name) << 64) | int(block)))


def normals(seed: int, start: int, stop: int, width: int, name: str = "paths") -> np.ndarray:
    """Standard normals for rows ``start:stop`` of a conceptually infinite
    (rows x width) matrix. Row r always receives the same values."""
    if stop <= start:
        return np.empty((0, width))
    b0, b1 = start // BLOCK, (stop - 1) // BLOCK
    out = np.empty((stop - start, width))
    pos = 0
    for b in range(b0, b1 + 1):
        blk = generator(seed, name, b).standard_normal((BLOCK, width))
        lo = max(start - b * BLOCK, 0)
        hi = min(stop - b * BLOCK, BLOCK)
        out[pos:pos + hi - lo] = blk[lo:hi]
        pos += hi - lo
    return out
