"""Module metadata and seed-derived embedding operators.

Embedding matrices are never persisted: every matrix is a pure function
of ``(global_seed, module_id, role)`` and is re-derived on demand from
the counter stream, so any block is computable without generating its
predecessors. The registry adds in-process caching and (for promoted
concepts) explicit atom overrides.

Roles:

* ``attr`` -- d x d_x Gaussian, embeds a module's own output vector.
* ``agg``  -- d x d_z Gaussian, embeds augmented elements of typed
  collections (see :mod:`sketchmem.stats`).
* ``rec``  -- d x d signed permutation, embeds the combined child
  sketch. Exactly orthogonal, so the recursion channel inverts by
  transpose in O(d) and never amplifies cross-channel noise the way a
  square Gaussian inverse would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SketchConfig
from .errors import CapacityError, DuplicateIdError, UnknownModuleError
from .kernels import counter_gaussians, counter_uniforms
from .rng import stream_key

_GAUSSIAN_ROLES = ("attr", "agg")
_MAX_MODULE_ID = (1 << 63) - 1


@dataclass(frozen=True)
class ModuleSpec:
    """One module of the (assumed) modular network."""

    module_id: int
    output_dim: int
    label: str = ""

    def __post_init__(self) -> None:
        if self.module_id < 0 or self.module_id > _MAX_MODULE_ID:
            raise ValueError(f"module_id out of range: {self.module_id}")
        if self.output_dim < 1:
            raise ValueError(f"output_dim must be >= 1, got {self.output_dim}")


class RecOperator:
    """Signed permutation acting as the recursion-channel embedding.

    ``apply`` computes R @ v, ``apply_t`` computes R.T @ v (the exact
    inverse), and ``solve_restricted`` is the minimum-norm least-squares
    solution when only some output rows are retained: recoverable
    coordinates invert exactly, the rest are 0.
    """

    __slots__ = ("perm", "signs")

    def __init__(self, perm: np.ndarray, signs: np.ndarray):
        self.perm = perm
        self.signs = signs

    @property
    def dim(self) -> int:
        return self.perm.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.signs * v[self.perm]

    def apply_t(self, w: np.ndarray) -> np.ndarray:
        out = np.empty_like(w)
        out[self.perm] = self.signs * w
        return out

    def solve_restricted(self, w: np.ndarray, retained: np.ndarray | None) -> np.ndarray:
        if retained is None:
            return self.apply_t(w)
        out = np.zeros(self.dim)
        out[self.perm[retained]] = self.signs[retained] * w[retained]
        return out

    def dense(self) -> np.ndarray:
        mat = np.zeros((self.dim, self.dim))
        mat[np.arange(self.dim), self.perm] = self.signs
        return mat


def derive_matrix(
    config: SketchConfig, module_id: int, role: str, rows: int, cols: int
) -> np.ndarray:
    """Re-derive the embedding matrix for ``(module_id, role)``.

    Gaussian roles give i.i.d. N(0, 1/rows) entries; the ``rec`` role
    materializes the signed permutation (rows must equal cols). Results
    are bit-identical across calls, runs and backends.
    """
    if rows < 1 or cols < 1:
        raise ValueError("matrix shape must be positive")
    if role in _GAUSSIAN_ROLES:
        key = stream_key("matrix", config.global_seed, module_id, role)
        flat = counter_gaussians(key, 0, rows * cols, 1.0 / np.sqrt(rows))
        return flat.reshape(rows, cols)
    if role == "rec":
        if rows != cols:
            raise ValueError("rec operator is square")
        return derive_rec_operator(config, module_id, rows).dense()
    raise ValueError(f"unknown role {role!r}")


def derive_rec_operator(config: SketchConfig, module_id: int, dim: int) -> RecOperator:
    """Signed permutation for the recursion channel, from the counter stream."""
    key = stream_key("matrix", config.global_seed, module_id, "rec")
    u = counter_uniforms(key, 0, 2 * dim)
    perm = np.argsort(u[:dim], kind="stable")
    signs = np.where(u[dim:] < 0.5, -1.0, 1.0)
    return RecOperator(perm, signs)


class ModuleRegistry:
    """Module specs plus cached embedding operators.

    Promoted concepts install an explicit attribute atom which overrides
    seed derivation for that id. Mutation bumps a version counter so
    stacked score banks are never stale.
    """

    def __init__(self) -> None:
        self._specs: dict[int, ModuleSpec] = {}
        self._atoms: dict[int, np.ndarray] = {}
        self._version = 0
        self._attr_cache: dict[tuple, np.ndarray] = {}
        self._rec_cache: dict[tuple, RecOperator] = {}
        self._bank_cache: dict[tuple, dict] = {}

    # --- membership -------------------------------------------------------

    def add(self, spec: ModuleSpec) -> ModuleSpec:
        if spec.module_id in self._specs:
            raise DuplicateIdError(f"module {spec.module_id} already registered")
        self._specs[spec.module_id] = spec
        self._version += 1
        return spec

    def add_module(self, module_id: int, output_dim: int, label: str = "") -> ModuleSpec:
        return self.add(ModuleSpec(module_id, output_dim, label))

    def get(self, module_id: int) -> ModuleSpec:
        try:
            return self._specs[module_id]
        except KeyError:
            raise UnknownModuleError(module_id) from None

    def ids(self) -> list[int]:
        return sorted(self._specs)

    def specs(self) -> list[ModuleSpec]:
        return [self._specs[i] for i in self.ids()]

    def next_id(self) -> int:
        nxt = max(self._specs, default=-1) + 1
        if nxt > _MAX_MODULE_ID:
            raise CapacityError("module id space exhausted")
        return nxt

    def __contains__(self, module_id: int) -> bool:
        return module_id in self._specs

    def __len__(self) -> int:
        return len(self._specs)

    def __iter__(self):
        return iter(self.specs())

    @property
    def version(self) -> int:
        return self._version

    # --- explicit atoms -----------------------------------------------------

    def register_atom(self, module_id: int, matrix: np.ndarray) -> None:
        """Install an explicit attribute matrix (d x output_dim) for a module."""
        spec = self.get(module_id)
        mat = np.ascontiguousarray(matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != spec.output_dim:
            raise ValueError(
                f"atom for module {module_id} must have {spec.output_dim} columns"
            )
        mat.setflags(write=False)
        self._atoms[module_id] = mat
        self._version += 1
        self._attr_cache = {k: v for k, v in self._attr_cache.items() if k[2] != module_id}
        self._bank_cache.clear()

    def has_atom(self, module_id: int) -> bool:
        return module_id in self._atoms

    # --- operators ----------------------------------------------------------

    def attr_matrix(self, config: SketchConfig, module_id: int) -> np.ndarray:
        spec = self.get(module_id)
        atom = self._atoms.get(module_id)
        if atom is not None:
            if atom.shape[0] != config.sketch_dim:
                raise ValueError("explicit atom dimension does not match config")
            return atom
        key = (config.global_seed, config.sketch_dim, module_id)
        mat = self._attr_cache.get(key)
        if mat is None:
            mat = derive_matrix(config, module_id, "attr", config.sketch_dim, spec.output_dim)
            mat.setflags(write=False)
            self._attr_cache[key] = mat
        return mat

    def rec_operator(self, config: SketchConfig, module_id: int) -> RecOperator:
        self.get(module_id)
        key = (config.global_seed, config.sketch_dim, module_id)
        op = self._rec_cache.get(key)
        if op is None:
            op = derive_rec_operator(config, module_id, config.sketch_dim)
            self._rec_cache[key] = op
        return op

    def attr_bank(self, config: SketchConfig, module_ids: tuple[int, ...]) -> dict:
        """Stacked attribute matrices grouped by output_dim.

        Returns {output_dim: (ids array, tensor of shape (m, d, output_dim))},
        cached per (config, ids, registry version).
        """
        key = (config.global_seed, config.sketch_dim, self._version, module_ids)
        bank = self._bank_cache.get(key)
        if bank is None:
            groups: dict[int, list[int]] = {}
            for mid in module_ids:
                groups.setdefault(self.get(mid).output_dim, []).append(mid)
            bank = {}
            for dx, ids in groups.items():
                tensor = np.stack([self.attr_matrix(config, mid) for mid in ids])
                bank[dx] = (np.asarray(ids), tensor)
            if len(self._bank_cache) > 8:
                self._bank_cache.clear()
            self._bank_cache[key] = bank
        return bank

    def clear_caches(self) -> None:
        self._attr_cache.clear()
        self._rec_cache.clear()
        self._bank_cache.clear()
