"""Seeded randomness plumbing.

Two kinds of randomness exist in this library:

* embedding matrices, which are defined by a keyed counter stream
  (see :mod:`sketchmem.kernels`) so any block of any matrix can be
  produced without generating its predecessors, and

* everything else (erasure subsets, event generation, calibration
  draws), which flows through named Philox substreams derived from a
  single top-level seed.

Both key derivations hash structured labels with BLAKE2b, which is
stable across platforms and Python versions.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream_key", "substream"]

_U64 = (1 << 64) - 1


def stream_key(*parts: int | str) -> int:
    """Derive a 64-bit stream key from a label tuple.

    Integers and strings hash into disjoint codomains, so
    ``stream_key(1, "a")`` and ``stream_key("1a")`` never collide by
    framing accidents.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, str):
            raw = part.encode("utf-8")
            h.update(b"s")
            h.update(len(raw).to_bytes(4, "little"))
            h.update(raw)
        else:
            h.update(b"i")
            h.update((int(part) & _U64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def substream(*parts: int | str) -> np.random.Generator:
    """A counter-based generator for the named sub-stream.

    Distinct label tuples give statistically independent streams; the
    same tuple always gives the same stream.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(*parts)))
