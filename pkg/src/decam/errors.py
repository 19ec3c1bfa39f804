"""Exception types shared across the package."""


class DecamError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(DecamError, ValueError):
    """A gene vector's length is not a positive multiple of the gene width."""


class InvalidGeometryError(DecamError, ValueError):
    """Image too small for the genome constraints, or non-finite genes."""


class ScorerUnavailableError(DecamError, RuntimeError):
    """Bridge process dead, handshake failed, timed out, or reported ERR."""


class ShapeMismatchError(DecamError, ValueError):
    """Scorer expects a different image height/width/channel count."""


class NonFiniteLogitError(DecamError, RuntimeError):
    """The model returned NaN or Inf; surfaced, never clamped."""


class DegenerateOracleError(DecamError, ValueError):
    """A synthetic oracle's reference image has zero brightness in a region."""


class EmptyPopulationError(DecamError, ValueError):
    """Candidate selection was asked to filter an empty population."""


class DegenerateSaliencyError(DecamError, RuntimeError):
    """All candidate masks were empty; the map cannot be normalized."""


class SaliencyFormatError(DecamError, ValueError):
    """A raw saliency-map file has a bad magic header or a size mismatch."""
