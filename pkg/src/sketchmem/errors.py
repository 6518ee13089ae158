"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigError -> 2, FormatError -> 3,
CapacityError -> 4. Everything else is an ordinary bug.
"""


class SketchMemError(Exception):
    """Base class for all library errors."""


class ConfigError(SketchMemError, ValueError):
    """Invalid configuration value or combination."""


class DimensionMismatchError(SketchMemError, ValueError):
    """Vector or sketch dimensions do not line up."""


class DuplicateIdError(SketchMemError, ValueError):
    """A module id, node id or record id was used twice."""


class UnknownModuleError(SketchMemError, KeyError):
    """Module id not present in the registry."""


class UnknownNodeError(SketchMemError, KeyError):
    """Node id not present in the computation record."""


class EmptyRecordError(SketchMemError, ValueError):
    """Computation record has no roots; there is nothing to sketch."""


class UndefinedSimilarityError(SketchMemError, ValueError):
    """No retained coordinates in common; cosine is undefined."""


class CapacityError(SketchMemError, ValueError):
    """Decode or fit is underdetermined for the requested sparsity,
    or an id space is exhausted."""


class FormatError(SketchMemError, ValueError):
    """A serialized artifact is corrupt, truncated or the wrong version."""
