"""Counter-based, stream-splittable random numbers.

Every random draw in the package goes through :func:`generator` or
:func:`normal`.  A stream is addressed by a master seed plus a path of
labels (strings or integers); the labels are hashed into the ``SeedSequence``
entropy so that distinct paths give statistically independent Philox keys.

Large arrays are produced chunk by chunk along the first axis.  Chunk ``c``
of stream ``path`` always uses the key derived from ``(seed, *path, c)``, so
the result does not depend on how the work is split between workers.
"""

from __future__ import annotations

import hashlib

import numpy as np

GENERATOR_ID = "philox4x64-seedseq-chunk16384"
CHUNK = 16384


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("stream labels must be non-negative")
        return int(label)
    digest = hashlib.sha256(str(label).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence addressed by ``seed`` and a label path."""
    return np.random.SeedSequence([int(seed) & (2**64 - 1)] + [_label_to_int(p) for p in path])


def generator(seed: int, *path) -> np.random.Generator:
    """A Philox generator for the stream ``(seed, *path)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *path)))


def derive_seed(seed: int, *path) -> int:
    """A 63-bit integer sub-seed, e.g. for recording in reports."""
    return int(seed_sequence(seed, *path).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _chunked(seed, path, shape, draw):
    shape = tuple(int(s) for s in shape)
    n = shape[0]
    out = np.empty(shape)
    for c, start in enumerate(range(0, n, CHUNK)):
        stop = min(n, start + CHUNK)
        out[start:stop] = draw(generator(seed, *path, c), (stop - start,) + shape[1:])
    return out


def normal(seed: int, path, shape) -> np.ndarray:
    """Standard normal array of ``shape``, chunked along axis 0."""
    return _chunked(seed, tuple(path), shape, lambda g, s: g.standard_normal(s))


def rademacher(seed: int, path, shape) -> np.ndarray:
    """Symmetric +-1 array of ``shape``, chunked along axis 0."""
    return _chunked(seed, tuple(path), shape,
                    lambda g, s: 2.0 * g.integers(0, 2, size=s) - 1.0)
