"""NumPy implementation of the counter-stream kernels.

Must stay bit-identical to ``_native``: the two backends are selected at
import time and golden files may be produced by either. Everything here
is exact integer arithmetic plus IEEE-754 operations that are correctly
rounded on every platform, with the single uniform->normal transform
shared through SciPy's ``ndtri``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
# 2**-53, exactly representable
_INV53 = 1.0 / 9007199254740992.0


def counter_hash(key: int, start: int, n: int) -> np.ndarray:
    """uint64 values ``start .. start+n-1`` of the keyed splitmix64 stream."""
    t = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    z = np.uint64(key) + t * _PHI
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(key: int, start: int, n: int) -> np.ndarray:
    """Open-interval uniforms on (0, 1), one per counter value.

    The mantissa is forced odd so the product with 2**-53 is exact and
    never reaches 0.0 or 1.0; both backends therefore produce the same
    bits with no rounding ambiguity.
    """
    z = counter_hash(key, start, n)
    odd = (z >> np.uint64(12)) * np.uint64(2) + np.uint64(1)
    return odd.astype(np.float64) * _INV53


def counter_gaussians(key: int, start: int, n: int, scale: float = 1.0) -> np.ndarray:
    """N(0, scale**2) draws via the inverse normal CDF of the uniform stream."""
    out = ndtri(counter_uniforms(key, start, n))
    if scale != 1.0:
        out *= scale
    return out
