"""Sketch decoding: matched-filter scores, block orthogonal matching
pursuit, attribute recovery and recursive tree decode. Mask-aware
throughout: masked coordinates hold zeros, so correlation products need
no row slicing, while least-squares fits restrict to retained rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import SketchConfig
from .encode import embed_output
from .errors import CapacityError, UndefinedSimilarityError
from .registry import ModuleRegistry
from .rng import substream
from .sketch import Sketch


@dataclass(frozen=True)
class DecodedEntry:
    module_id: int
    attribute: np.ndarray
    score: float


@dataclass(frozen=True)
class DecodedLayer:
    """One layer's decode: entries by descending score, plus what is left."""

    entries: tuple[DecodedEntry, ...]
    residual: Sketch
    residual_ratio: float

    def support(self) -> set[int]:
        return {e.module_id for e in self.entries}


@dataclass(frozen=True)
class DecodedTree:
    module_id: int
    attribute: np.ndarray
    confidence: float
    children: tuple["DecodedTree", ...] = ()

    def to_obj(self) -> dict:
        return {
            "module_id": self.module_id,
            "attribute": [float(v) for v in self.attribute],
            "confidence": self.confidence,
            "children": [c.to_obj() for c in self.children],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj())

    @classmethod
    def from_obj(cls, obj: dict) -> "DecodedTree":
        return cls(
            module_id=obj["module_id"],
            attribute=np.asarray(obj["attribute"], dtype=np.float64),
            confidence=obj["confidence"],
            children=tuple(cls.from_obj(c) for c in obj["children"]),
        )


@dataclass(frozen=True)
class ThresholdCalibration:
    """Detection threshold between fired and non-fired score populations.

    ``separable`` is False when the populations overlap at the chosen
    percentiles; theta is then the crossing midpoint and callers should
    treat detections as unreliable.
    """

    theta: float
    separable: bool
    fired_low: float
    nonfired_high: float


def _retained(sketch: Sketch) -> tuple[np.ndarray | None, int]:
    idx = sketch.retained_indices()
    return idx, sketch.dim if idx is None else idx.shape[0]


def module_scores(
    config: SketchConfig,
    registry: ModuleRegistry,
    sketch: Sketch,
    module_ids: list[int] | None = None,
) -> list[tuple[int, float]]:
    """Matched-filter score per module, in module-id order.

    score_i = ||R_i_attr.T y|| ** 2 * (d / retained) ** 2 / d_x

    The squared retention correction keeps a fired module's score near
    ||x||^2 / d_x at any erasure level, so one threshold calibrated on
    un-erased sketches stays valid as coordinates are forgotten.
    """
    ids = tuple(sorted(registry.ids() if module_ids is None else module_ids))
    _, n_ret = _retained(sketch)
    if n_ret == 0:
        raise UndefinedSimilarityError("sketch has no retained coordinates")
    correction = (sketch.dim / n_ret) ** 2
    out: dict[int, float] = {}
    for dx, (group_ids, tensor) in registry.attr_bank(config, ids).items():
        proj = np.einsum("mdk,d->mk", tensor, sketch.values)
        scores = (proj * proj).sum(axis=1) * (correction / dx)
        for mid, sc in zip(group_ids, scores):
            out[int(mid)] = float(sc)
    return [(mid, out[mid]) for mid in ids]


def detect_modules(
    config: SketchConfig,
    registry: ModuleRegistry,
    sketch: Sketch,
    theta: float,
    k_max: int,
) -> set[int]:
    """Modules scoring at least theta, capped at the k_max best."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    scored = module_scores(config, registry, sketch)
    # descending score, ties to the lower module id
    scored.sort(key=lambda t: (-t[1], t[0]))
    return {mid for mid, sc in scored[:k_max] if sc >= theta}


def recover_attribute(
    config: SketchConfig, registry: ModuleRegistry, sketch: Sketch, module_id: int
) -> np.ndarray:
    """Least-squares attribute estimate over retained coordinates.

    Exact when the sketch contains only this module; other modules'
    energy enters as zero-mean interference of order sqrt(k*d_x/d).
    """
    spec = registry.get(module_id)
    mat = registry.attr_matrix(config, module_id)
    idx, n_ret = _retained(sketch)
    if n_ret < spec.output_dim:
        raise CapacityError(
            f"{n_ret} retained coordinates cannot determine a dim-{spec.output_dim} attribute"
        )
    if idx is None:
        sol, *_ = np.linalg.lstsq(mat, sketch.values, rcond=None)
    else:
        sol, *_ = np.linalg.lstsq(mat[idx], sketch.values[idx], rcond=None)
    return sol


def block_omp_decode(
    config: SketchConfig,
    registry: ModuleRegistry,
    sketch: Sketch,
    candidate_ids: list[int] | None = None,
    k_max: int = 8,
    eps: float = 1e-6,
    score_floor: float = 0.0,
    min_gain: float = 0.0,
) -> DecodedLayer:
    """Block orthogonal matching pursuit with joint re-fitting.

    Each round scores all unselected candidates against the current
    residual, admits the best block, then re-fits all selected blocks
    jointly and subtracts. Stops at k_max blocks, at residual_ratio <=
    eps, when the best score drops below ``score_floor``, or when a
    round fails to shrink the residual ratio by the relative ``min_gain``
    (that round's block is then discarded).
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    candidates = sorted(registry.ids() if candidate_ids is None else candidate_ids)
    idx, n_ret = _retained(sketch)
    if n_ret == 0:
        raise UndefinedSimilarityError("sketch has no retained coordinates")
    dx_sorted = sorted((registry.get(mid).output_dim for mid in candidates), reverse=True)
    if sum(dx_sorted[:k_max]) > n_ret:
        raise CapacityError(
            f"joint fit of {k_max} blocks exceeds {n_ret} retained coordinates"
        )

    y = sketch.values if idx is None else sketch.values[idx]
    norm_y = float(np.linalg.norm(y))
    if norm_y == 0.0:
        return DecodedLayer((), Sketch(np.zeros(sketch.dim), sketch.mask), 0.0)

    def restricted(mid: int) -> np.ndarray:
        mat = registry.attr_matrix(config, mid)
        return mat if idx is None else mat[idx]

    selected: list[int] = []
    pick_scores: dict[int, float] = {}
    blocks: list[np.ndarray] = []
    residual_full = sketch.values.copy()
    resid = y.copy()
    ratio = 1.0
    coefs = np.zeros(0)

    while len(selected) < k_max:
        remaining = [mid for mid in candidates if mid not in pick_scores]
        if not remaining:
            break
        scored = module_scores(
            config, registry, Sketch(residual_full, sketch.mask, _trusted=True), remaining
        )
        best_id, best_score = min(scored, key=lambda t: (-t[1], t[0]))
        if best_score <= 0.0 or best_score < score_floor:
            break
        trial_blocks = blocks + [restricted(best_id)]
        design = np.hstack(trial_blocks)
        sol, *_ = np.linalg.lstsq(design, y, rcond=None)
        new_resid = y - design @ sol
        new_ratio = min(1.0, float(np.linalg.norm(new_resid)) / norm_y)
        if min_gain > 0.0 and (ratio - new_ratio) < min_gain * ratio:
            break
        selected.append(best_id)
        pick_scores[best_id] = best_score
        blocks = trial_blocks
        coefs = sol
        resid = new_resid
        ratio = new_ratio
        residual_full = np.zeros(sketch.dim)
        if idx is None:
            residual_full[:] = resid
        else:
            residual_full[idx] = resid
        if ratio <= eps:
            break

    entries = []
    offset = 0
    for mid in selected:
        dx = registry.get(mid).output_dim
        entries.append(DecodedEntry(mid, coefs[offset : offset + dx].copy(), pick_scores[mid]))
        offset += dx
    entries.sort(key=lambda e: (-e.score, e.module_id))
    residual_sketch = Sketch(residual_full, sketch.mask)
    return DecodedLayer(tuple(entries), residual_sketch, ratio if selected else 1.0)


def decode_tree(
    config: SketchConfig,
    registry: ModuleRegistry,
    sketch: Sketch,
    depth_limit: int,
    k_max: int,
    theta: float = 0.0,
    eps: float = 1e-6,
    min_gain: float = 0.05,
) -> list[DecodedTree]:
    """Recursive decode to ``depth_limit`` levels.

    Every level is decoded on a unit-normalized copy of its input so the
    ``theta`` floor is scale-free; detected blocks' recursion channels
    are inverted (orthogonal transpose on retained rows) to produce each
    node's child-level input. Child counts are decided greedily: a level
    keeps admitting blocks while each admission improves the residual
    ratio by at least ``min_gain``. Attribute estimates are rescaled by
    the known construction factors (root 1/sqrt(m), channel weights,
    child 1/sqrt(c)); a node decoded without children is treated as a
    leaf, which embeds at full weight.
    """
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    return _decode_level(
        config, registry, sketch, depth_limit, k_max, theta, eps, min_gain, amp=1.0
    )


def _decode_level(config, registry, sketch, depth_left, k_max, theta, eps, min_gain, amp):
    idx, n_ret = _retained(sketch)
    if n_ret == 0:
        return []
    level_norm = float(np.linalg.norm(sketch.values))
    if level_norm <= 0.0:
        return []
    unit = Sketch(sketch.values / level_norm, sketch.mask, _trusted=True)
    layer = block_omp_decode(
        config,
        registry,
        unit,
        k_max=k_max,
        eps=eps,
        score_floor=theta,
        min_gain=min_gain,
    )
    if not layer.entries:
        return []
    n_here = len(layer.entries)
    confidence = float(np.clip(1.0 - layer.residual_ratio, 0.0, 1.0))
    child_amp = amp * np.sqrt(n_here) / config.rec_weight
    residual_values = layer.residual.values * level_norm
    out = []
    for entry in layer.entries:
        children: tuple[DecodedTree, ...] = ()
        if depth_left > 1:
            rec = registry.rec_operator(config, entry.module_id)
            child_values = rec.solve_restricted(residual_values, idx)
            child_mask = None
            if idx is not None:
                keep = np.zeros(sketch.dim, dtype=bool)
                keep[rec.perm[idx]] = True
                child_mask = keep
            children = tuple(
                _decode_level(
                    config,
                    registry,
                    Sketch(child_values, child_mask),
                    depth_left - 1,
                    k_max,
                    theta,
                    eps,
                    min_gain,
                    child_amp,
                )
            )
        alpha_eff = config.attr_weight if children else 1.0
        attribute = entry.attribute * (level_norm * amp * np.sqrt(n_here) / alpha_eff)
        out.append(DecodedTree(entry.module_id, attribute, confidence, children))
    return out


def calibrate_threshold(
    config: SketchConfig,
    registry: ModuleRegistry,
    trials: int = 200,
    seed: int | None = None,
) -> ThresholdCalibration:
    """Threshold between non-fired and fired matched-filter scores.

    Scores unit-attribute single-module sketches for every registered
    module cyclically; theta is the midpoint between the non-fired 99th
    percentile and the fired 1st percentile. Deterministic given the
    config seed (or an explicit one).
    """
    if trials < 100:
        raise ValueError("calibration needs at least 100 trials")
    ids = registry.ids()
    if not ids:
        raise ValueError("registry is empty")
    rng = substream(config.global_seed if seed is None else seed, "calibrate")
    fired: list[float] = []
    nonfired: list[float] = []
    for t in range(trials):
        mid = ids[t % len(ids)]
        dx = registry.get(mid).output_dim
        x = rng.normal(size=dx)
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            continue
        sk = embed_output(config, registry, mid, x / nrm)
        for other, sc in module_scores(config, registry, sk):
            (fired if other == mid else nonfired).append(sc)
    fired_low = float(np.percentile(fired, 1))
    nonfired_high = float(np.percentile(nonfired, 99))
    theta = 0.5 * (fired_low + nonfired_high)
    return ThresholdCalibration(theta, nonfired_high < fired_low, fired_low, nonfired_high)
