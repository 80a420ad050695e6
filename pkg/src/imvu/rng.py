"""Deterministic random-stream derivation shared by every randomized pipeline."""

from __future__ import annotations

import zlib

import numpy as np

# Coordinates per independent substream in vector privatization.  Workers may
# only split work on chunk boundaries, which keeps the drawn values identical
# for any worker count.
COORD_CHUNK = 4096

# Domain-separation tags so a named substream can never collide with a
# coordinate substream derived from the same root seed.
_NAME_TAG = 0x6E616D65
_COORD_TAG = 0x636F6F72


def _as_entropy(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def substream(seed: int, *path) -> np.random.Generator:
    """Generator derived from a root seed and a path of labels (str or int)."""
    entropy = (_NAME_TAG, _as_entropy(seed)) + tuple(_as_entropy(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def coordinate_uniforms(seed: int, start: int, stop: int, dim: int) -> np.ndarray:
    """Uniform draws for coordinates [start, stop) of a dim-length vector.

    The draw for coordinate k depends only on (seed, k's chunk), so any
    chunk-aligned partition of [0, dim) across workers reproduces the exact
    numbers a single worker would produce.
    """
    if not 0 <= start <= stop <= dim:
        raise ValueError(f"coordinate range [{start}, {stop}) out of bounds for dim {dim}")
    out = np.empty(stop - start)
    first = (start // COORD_CHUNK) * COORD_CHUNK
    for c0 in range(first, stop, COORD_CHUNK):
        n = min(COORD_CHUNK, dim - c0)
        rng = np.random.default_rng(
            np.random.SeedSequence((_COORD_TAG, _as_entropy(seed), c0))
        )
        vals = rng.random(n)
        lo, hi = max(start, c0), min(stop, c0 + n)
        out[lo - start : hi - start] = vals[lo - c0 : hi - c0]
    return out
