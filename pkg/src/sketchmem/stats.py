"""Collection sketches: aggregate statistics from a single vector.

Each element x of a typed multiset is lifted to an augmented vector

    z = concat( x            [moment1]
                x * x        [moment2]
                1            [count]
                one_hot(b)   [histogram, b = bucket of <proj, x>] )

and the collection sketch is sum_j R_agg @ z_j, linear in the multiset.
Estimators invert their own channel columns by least squares over
retained rows; the count column joins every inversion (when present)
because its coefficient is the one guaranteed-large component and would
otherwise dominate the cross-channel interference.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from .config import SketchConfig
from .errors import DimensionMismatchError, FormatError, SketchMemError
from .registry import derive_matrix
from .rng import substream
from .sketch import Sketch

CHANNELS = ("moment1", "moment2", "count", "histogram")


class EmptyCollectionError(SketchMemError, ValueError):
    """Estimated count too small to normalize by."""


@dataclass(frozen=True)
class Quantizer:
    """1-D projection plus bucket edges for the histogram channel.

    Edges are B+1 ascending reals whose first and last entries are the
    -inf / +inf sentinels.
    """

    direction: np.ndarray
    edges: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=np.float64)
        if edges.ndim != 1 or edges.shape[0] < 2:
            raise ValueError("need at least 2 bucket edges")
        if not (np.diff(edges) > 0).all():
            raise ValueError("bucket edges must be strictly increasing")
        if not (np.isneginf(edges[0]) and np.isposinf(edges[-1])):
            raise ValueError("first/last edges must be -inf/+inf sentinels")
        object.__setattr__(self, "edges", edges)
        d = np.asarray(self.direction, dtype=np.float64)
        nrm = np.linalg.norm(d)
        if nrm == 0:
            raise ValueError("projection direction must be nonzero")
        object.__setattr__(self, "direction", d / nrm)

    @property
    def n_buckets(self) -> int:
        return self.edges.shape[0] - 1

    def bucket(self, items: np.ndarray) -> np.ndarray:
        """Bucket index per row of ``items``."""
        proj = np.atleast_2d(items) @ self.direction
        return np.searchsorted(self.edges, proj, side="right") - 1

    @classmethod
    def uniform(cls, direction, lo: float, hi: float, n_buckets: int) -> "Quantizer":
        """n_buckets buckets: open tails plus uniform interior in [lo, hi]."""
        if n_buckets < 2:
            raise ValueError("need at least 2 buckets")
        interior = np.linspace(lo, hi, n_buckets - 1)
        return cls(np.asarray(direction), np.concatenate(([-np.inf], interior, [np.inf])))

    @classmethod
    def from_config(
        cls, config: SketchConfig, type_id: int, element_dim: int,
        lo: float = -1.0, hi: float = 1.0, n_buckets: int = 8,
    ) -> "Quantizer":
        rng = substream(config.global_seed, "quantizer", type_id)
        return cls.uniform(rng.normal(size=element_dim), lo, hi, n_buckets)


@dataclass(frozen=True)
class CollectionSketch:
    """Sketch of a typed multiset plus its self-describing channel layout."""

    sketch: Sketch
    type_id: int
    channels: tuple[str, ...]
    element_dim: int
    bucket_edges: np.ndarray | None = None

    def __post_init__(self) -> None:
        bad = [c for c in self.channels if c not in CHANNELS]
        if bad:
            raise ValueError(f"unknown channels {bad}")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channels")
        if ("histogram" in self.channels) != (self.bucket_edges is not None):
            raise ValueError("histogram channel and bucket_edges go together")

    @property
    def n_buckets(self) -> int:
        return 0 if self.bucket_edges is None else self.bucket_edges.shape[0] - 1

    def augmented_dim(self) -> int:
        dx, b = self.element_dim, self.n_buckets
        widths = {"moment1": dx, "moment2": dx, "count": 1, "histogram": b}
        return sum(widths[c] for c in self.channels)

    def channel_slice(self, channel: str) -> slice:
        dx, b = self.element_dim, self.n_buckets
        widths = {"moment1": dx, "moment2": dx, "count": 1, "histogram": b}
        off = 0
        for c in CHANNELS:
            if c not in self.channels:
                continue
            if c == channel:
                return slice(off, off + widths[c])
            off += widths[c]
        raise ValueError(f"channel {channel!r} not present")

    def to_json(self) -> str:
        obj = {
            "type_id": self.type_id,
            "channels": list(self.channels),
            "element_dim": self.element_dim,
            "sketch": base64.b64encode(self.sketch.to_bytes()).decode("ascii"),
        }
        if self.bucket_edges is not None:
            obj["bucket_edges"] = [
                "-inf" if np.isneginf(e) else "inf" if np.isposinf(e) else float(e)
                for e in self.bucket_edges
            ]
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "CollectionSketch":
        try:
            obj = json.loads(text)
            edges = None
            if "bucket_edges" in obj:
                edges = np.asarray(
                    [float(e) for e in obj["bucket_edges"]], dtype=np.float64
                )
            return cls(
                sketch=Sketch.from_bytes(base64.b64decode(obj["sketch"])),
                type_id=obj["type_id"],
                channels=tuple(obj["channels"]),
                element_dim=obj["element_dim"],
                bucket_edges=edges,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid collection sketch document: {exc}") from exc


def _canonical_channels(channels) -> tuple[str, ...]:
    chosen = set(channels)
    return tuple(c for c in CHANNELS if c in chosen)


def sketch_collection(
    config: SketchConfig,
    type_id: int,
    items,
    channels=("moment1", "moment2", "count"),
    quantizer: Quantizer | None = None,
    element_dim: int | None = None,
) -> CollectionSketch:
    """Sketch a multiset of same-type vectors. Exactly linear: the sketch
    of a multiset union is the sum of the parts' sketches."""
    channels = _canonical_channels(channels)
    if not channels:
        raise ValueError("need at least one channel")
    if ("histogram" in channels) and quantizer is None:
        raise ValueError("histogram channel requires a quantizer")
    items = np.asarray(items, dtype=np.float64)
    if items.size == 0:
        if element_dim is None:
            raise ValueError("element_dim is required for an empty collection")
        items = items.reshape(0, element_dim)
    if items.ndim != 2:
        raise DimensionMismatchError("items must be a list of equal-length vectors")
    dx = items.shape[1]
    if element_dim is not None and element_dim != dx:
        raise DimensionMismatchError(f"items have dim {dx}, expected {element_dim}")

    edges = None
    n_buckets = 0
    if "histogram" in channels:
        edges = quantizer.edges
        n_buckets = quantizer.n_buckets

    cols = []
    for c in channels:
        if c == "moment1":
            cols.append(items)
        elif c == "moment2":
            cols.append(items * items)
        elif c == "count":
            cols.append(np.ones((items.shape[0], 1)))
        else:
            onehot = np.zeros((items.shape[0], n_buckets))
            if items.shape[0]:
                onehot[np.arange(items.shape[0]), quantizer.bucket(items)] = 1.0
            cols.append(onehot)
    z_total = np.hstack(cols).sum(axis=0) if items.shape[0] else np.zeros(
        sum(c.shape[1] for c in cols)
    )
    mat = derive_matrix(config, type_id, "agg", config.sketch_dim, z_total.shape[0])
    return CollectionSketch(
        sketch=Sketch(mat @ z_total),
        type_id=type_id,
        channels=channels,
        element_dim=dx,
        bucket_edges=edges,
    )


def _inverted_blocks(config: SketchConfig, cs: CollectionSketch, wanted: list[str]) -> dict:
    """Joint least squares of the wanted channels' columns over retained rows."""
    mat = derive_matrix(config, cs.type_id, "agg", config.sketch_dim, cs.augmented_dim())
    slices = {c: cs.channel_slice(c) for c in wanted}
    design = np.hstack([mat[:, slices[c]] for c in wanted])
    idx = cs.sketch.retained_indices()
    if idx is not None:
        design = design[idx]
        target = cs.sketch.values[idx]
    else:
        target = cs.sketch.values
    if design.shape[0] < design.shape[1]:
        raise DimensionMismatchError("too few retained coordinates for channel inversion")
    sol, *_ = np.linalg.lstsq(design, target, rcond=None)
    out = {}
    off = 0
    for c in wanted:
        width = slices[c].stop - slices[c].start
        out[c] = sol[off : off + width]
        off += width
    return out


def _require(cs: CollectionSketch, *needed: str) -> None:
    missing = [c for c in needed if c not in cs.channels]
    if missing:
        raise ValueError(f"collection sketch lacks channels {missing}")


def estimate_count(config: SketchConfig, cs: CollectionSketch) -> float:
    """Multiset size estimate from the count coordinate alone."""
    _require(cs, "count")
    return float(_inverted_blocks(config, cs, ["count"])["count"][0])


def estimate_mean(config: SketchConfig, cs: CollectionSketch) -> np.ndarray:
    """First-moment estimate S1_hat / n_hat."""
    _require(cs, "moment1", "count")
    blocks = _inverted_blocks(config, cs, ["moment1", "count"])
    n_hat = float(blocks["count"][0])
    if n_hat < 0.5:
        raise EmptyCollectionError(f"estimated count {n_hat:.3f} is below 0.5")
    return blocks["moment1"] / n_hat


def estimate_variance(config: SketchConfig, cs: CollectionSketch) -> np.ndarray:
    """Per-coordinate S2_hat/n_hat - (S1_hat/n_hat)^2, clamped at 0."""
    _require(cs, "moment1", "moment2", "count")
    blocks = _inverted_blocks(config, cs, ["moment1", "moment2", "count"])
    n_hat = float(blocks["count"][0])
    if n_hat < 0.5:
        raise EmptyCollectionError(f"estimated count {n_hat:.3f} is below 0.5")
    var = blocks["moment2"] / n_hat - (blocks["moment1"] / n_hat) ** 2
    return np.maximum(var, 0.0)


def estimate_histogram(config: SketchConfig, cs: CollectionSketch) -> list[float]:
    """Per-bucket counts, clamped at 0."""
    _require(cs, "histogram")
    wanted = ["histogram", "count"] if "count" in cs.channels else ["histogram"]
    hist = _inverted_blocks(config, cs, wanted)["histogram"]
    return [float(v) for v in np.maximum(hist, 0.0)]
