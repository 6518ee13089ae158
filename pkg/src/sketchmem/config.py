"""Sketch-space configuration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

_DEFAULT_WEIGHT = 1.0 / math.sqrt(2.0)
_MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class SketchConfig:
    """Dimension, seed and channel weights of a sketch space.

    Two configs with equal ``(sketch_dim, global_seed)`` derive
    bit-identical embedding matrices for every (module, role) pair.
    ``attr_weight**2 + rec_weight**2`` must equal 1 so recursive
    sketches preserve expected norm at every depth.
    """

    sketch_dim: int
    global_seed: int
    attr_weight: float = _DEFAULT_WEIGHT
    rec_weight: float = _DEFAULT_WEIGHT
    erasure_fill: str = field(default="masked", repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.sketch_dim, int) or self.sketch_dim < 1:
            raise ConfigError(f"sketch_dim must be a positive integer, got {self.sketch_dim!r}")
        if not isinstance(self.global_seed, int) or not 0 <= self.global_seed <= _MAX_SEED:
            raise ConfigError("global_seed must be an unsigned 64-bit integer")
        if abs(self.attr_weight**2 + self.rec_weight**2 - 1.0) > 1e-9:
            raise ConfigError(
                f"attr_weight^2 + rec_weight^2 must be 1, got "
                f"{self.attr_weight**2 + self.rec_weight**2:.12f}"
            )
        if self.erasure_fill != "masked":
            raise ConfigError(f"unsupported erasure_fill {self.erasure_fill!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "sketch_dim": self.sketch_dim,
                "global_seed": self.global_seed,
                "attr_weight": self.attr_weight,
                "rec_weight": self.rec_weight,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SketchConfig":
        try:
            obj = json.loads(text)
            return cls(
                sketch_dim=obj["sketch_dim"],
                global_seed=obj["global_seed"],
                attr_weight=obj.get("attr_weight", _DEFAULT_WEIGHT),
                rec_weight=obj.get("rec_weight", _DEFAULT_WEIGHT),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid sketch config document: {exc}") from exc
