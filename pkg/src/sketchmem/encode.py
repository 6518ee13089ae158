"""Sketch construction: single outputs, layers, recursive hierarchies.

The layer sketch is the plain unscaled sum of per-module embeddings.
Recursive node sketches mix the attribute channel with the recursion
channel at weights (alpha, beta); a leaf embeds at full weight. Stored
event sketches are scaled by 1/sqrt(#roots) to bound norms for the
index; the layer form is left unscaled on purpose.
"""

from __future__ import annotations

import numpy as np

from .config import SketchConfig
from .errors import DimensionMismatchError, DuplicateIdError, EmptyRecordError
from .record import ComputationRecord
from .registry import ModuleRegistry
from .sketch import Sketch


def _embed_values(
    config: SketchConfig, registry: ModuleRegistry, module_id: int, x: np.ndarray
) -> np.ndarray:
    spec = registry.get(module_id)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.output_dim,):
        raise DimensionMismatchError(
            f"module {module_id} expects output of dim {spec.output_dim}, got {x.shape}"
        )
    return registry.attr_matrix(config, module_id) @ x


def embed_output(
    config: SketchConfig, registry: ModuleRegistry, module_id: int, x
) -> Sketch:
    """Embed one module output: R_attr @ x. Exactly linear in x."""
    return Sketch(_embed_values(config, registry, module_id, np.asarray(x)))


def sketch_layer(
    config: SketchConfig, registry: ModuleRegistry, outputs: list[tuple[int, np.ndarray]]
) -> Sketch:
    """Unscaled sum of embeddings over distinct fired modules."""
    seen: set[int] = set()
    total = np.zeros(config.sketch_dim)
    for module_id, x in outputs:
        if module_id in seen:
            raise DuplicateIdError(f"module {module_id} appears twice in one layer")
        seen.add(module_id)
        total += _embed_values(config, registry, module_id, x)
    return Sketch(total)


def _node_values(
    config: SketchConfig,
    registry: ModuleRegistry,
    record: ComputationRecord,
    node_id: int,
    memo: dict[int, np.ndarray],
) -> np.ndarray:
    if node_id in memo:
        return memo[node_id]
    node = record.node(node_id)
    own = _embed_values(config, registry, node.module_id, node.output)
    if node.children:
        child_sum = np.zeros(config.sketch_dim)
        for cid in node.children:
            child_sum += _node_values(config, registry, record, cid, memo)
        child_sum /= np.sqrt(len(node.children))
        rec = registry.rec_operator(config, node.module_id)
        out = config.attr_weight * own + config.rec_weight * rec.apply(child_sum)
    else:
        out = own
    memo[node_id] = out
    return out


def sketch_node(
    config: SketchConfig, registry: ModuleRegistry, record: ComputationRecord, node_id: int
) -> Sketch:
    """Recursive sketch of one node:

        s(i) = alpha * R_attr x_i + beta * R_rec ( sum_children s(j) / sqrt(c) )

    with a childless node reducing to the plain embedding."""
    return Sketch(_node_values(config, registry, record, node_id, {}))


def sketch_event(
    config: SketchConfig, registry: ModuleRegistry, record: ComputationRecord
) -> Sketch:
    """Canonical stored representation: root sketches summed and scaled
    by 1/sqrt(#roots)."""
    if not record.roots:
        raise EmptyRecordError("cannot sketch an event with no roots")
    memo: dict[int, np.ndarray] = {}
    total = np.zeros(config.sketch_dim)
    for rid in record.roots:
        total += _node_values(config, registry, record, rid, memo)
    return Sketch(total / np.sqrt(len(record.roots)))
