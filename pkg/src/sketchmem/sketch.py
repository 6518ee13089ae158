"""The Sketch value type and its algebra.

A sketch is a dense real vector of fixed dimension with an optional
retention mask. Masked coordinates always hold 0 so linear algebra can
ignore the mask; estimators that need unbiasedness rescale by the
retained fraction themselves.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DimensionMismatchError, FormatError, UndefinedSimilarityError
from .rng import substream

_MAGIC = b"SKCH"
_VERSION = 1
_HEADER = struct.Struct("<4sHIB")  # magic, version, dim, mask flag


class Sketch:
    """Immutable real vector with an optional coordinate-retention mask.

    ``mask[i] == True`` means coordinate i is retained. ``mask is None``
    means everything is retained; an all-True mask normalizes to None.
    """

    __slots__ = ("values", "mask", "_norm")

    def __init__(self, values, mask=None, _trusted: bool = False):
        if _trusted:
            self.values = values
            self.mask = mask
        else:
            vals = np.ascontiguousarray(values, dtype=np.float64)
            if vals.ndim != 1:
                raise DimensionMismatchError("sketch values must be a 1-D vector")
            if mask is not None:
                m = np.ascontiguousarray(mask, dtype=bool)
                if m.shape != vals.shape:
                    raise DimensionMismatchError("mask length must match sketch dimension")
                if m.all():
                    mask = None
                else:
                    vals = np.where(m, vals, 0.0)
                    mask = m
                    mask.setflags(write=False)
            self.values = vals
            self.values.setflags(write=False)
            self.mask = mask
        self._norm = None

    @classmethod
    def zeros(cls, dim: int) -> "Sketch":
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def retained_count(self) -> int:
        return self.dim if self.mask is None else int(self.mask.sum())

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = float(np.linalg.norm(self.values))
        return self._norm

    def retained_indices(self) -> np.ndarray | None:
        """Indices of retained coordinates, or None when unmasked."""
        return None if self.mask is None else np.flatnonzero(self.mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sketch):
            return NotImplemented
        if self.dim != other.dim or not np.array_equal(self.values, other.values):
            return False
        a = np.ones(self.dim, bool) if self.mask is None else self.mask
        b = np.ones(other.dim, bool) if other.mask is None else other.mask
        return bool(np.array_equal(a, b))

    def __repr__(self) -> str:
        return f"Sketch(dim={self.dim}, retained={self.retained_count}, norm={self.norm:.4g})"

    # --- binary format ---------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialize: magic, version u16, dim u32, mask flag u8,
        dim little-endian float32, then LSB-first mask bytes if flagged."""
        flag = 0 if self.mask is None else 1
        out = [_HEADER.pack(_MAGIC, _VERSION, self.dim, flag)]
        out.append(self.values.astype("<f4").tobytes())
        if flag:
            out.append(np.packbits(self.mask, bitorder="little").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Sketch":
        sketch, end = cls.read_from(data, 0)
        if end != len(data):
            raise FormatError("trailing bytes after sketch payload")
        return sketch

    @classmethod
    def read_from(cls, data: bytes, offset: int) -> tuple["Sketch", int]:
        """Parse one sketch starting at ``offset``; returns (sketch, end)."""
        if len(data) - offset < _HEADER.size:
            raise FormatError("truncated sketch header")
        magic, version, dim, flag = _HEADER.unpack_from(data, offset)
        if magic != _MAGIC:
            raise FormatError(f"bad sketch magic {magic!r}")
        if version != _VERSION:
            raise FormatError(f"unsupported sketch format version {version}")
        pos = offset + _HEADER.size
        need = 4 * dim + (flag and (dim + 7) // 8)
        if len(data) - pos < need:
            raise FormatError("truncated sketch payload")
        values = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += 4 * dim
        mask = None
        if flag:
            nbytes = (dim + 7) // 8
            packed = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=pos)
            mask = np.unpackbits(packed, bitorder="little")[:dim].astype(bool)
            pos += nbytes
        return cls(values, mask), pos


def combine(sketches: list[Sketch], weights: list[float]) -> Sketch:
    """Weighted sum; masks intersect (retained only where all inputs retain)."""
    if len(sketches) != len(weights):
        raise DimensionMismatchError("need one weight per sketch")
    if not sketches:
        raise DimensionMismatchError("combine of an empty list is undefined")
    dim = sketches[0].dim
    values = np.zeros(dim)
    mask = None
    for s, w in zip(sketches, weights):
        if s.dim != dim:
            raise DimensionMismatchError(f"mixed sketch dimensions {dim} and {s.dim}")
        values += w * s.values
        if s.mask is not None:
            mask = s.mask.copy() if mask is None else (mask & s.mask)
    return Sketch(values, mask)


def erase(sketch: Sketch, fraction: float, seed: int) -> Sketch:
    """Mask a uniformly random ``floor(fraction * retained)`` subset of the
    retained coordinates. Composing erasures multiplies retention rates."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"erasure fraction must be in [0, 1), got {fraction}")
    retained = sketch.retained_indices()
    n_ret = sketch.dim if retained is None else retained.shape[0]
    drop = int(fraction * n_ret)
    if drop == 0:
        return sketch
    rng = substream("erase", seed)
    pool = np.arange(sketch.dim) if retained is None else retained
    dropped = rng.choice(pool, size=drop, replace=False)
    mask = np.ones(sketch.dim, bool) if sketch.mask is None else sketch.mask.copy()
    mask[dropped] = False
    return Sketch(sketch.values, mask)


def cosine(a: Sketch, b: Sketch) -> float:
    """Mask-aware cosine over the intersection of retained coordinates.

    Returns 0 when either restricted vector is zero; raises when the
    intersection is empty (similarity is undefined, not zero).
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"cosine of dims {a.dim} and {b.dim}")
    if a.mask is None and b.mask is None:
        va, vb = a.values, b.values
    else:
        both = (np.ones(a.dim, bool) if a.mask is None else a.mask) & (
            np.ones(b.dim, bool) if b.mask is None else b.mask
        )
        if not both.any():
            raise UndefinedSimilarityError("no retained coordinates in common")
        va, vb = a.values[both], b.values[both]
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))
