"""Counter-stream kernels with backend selection at import.

The compiled extension is preferred when present; ``SKETCHMEM_PURE=1``
forces the NumPy fallback. Both backends are bit-identical (enforced by
tests and the benchmark), so the choice only affects speed.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "fallback"

if os.environ.get("SKETCHMEM_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _native  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        _native = None  # noqa: N816
else:
    _native = None  # noqa: N816

_impl = _native if BACKEND == "native" else _fallback

counter_hash = _impl.counter_hash
counter_uniforms = _impl.counter_uniforms
counter_gaussians = _impl.counter_gaussians


def backends() -> dict[str, object]:
    """Importable backends by name (for benchmarks and identity tests)."""
    out: dict[str, object] = {"fallback": _fallback}
    if _native is not None:
        out["native"] = _native
    return out


__all__ = [
    "BACKEND",
    "backends",
    "counter_hash",
    "counter_uniforms",
    "counter_gaussians",
]
