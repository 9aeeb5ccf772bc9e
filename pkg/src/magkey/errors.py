"""Exception types shared across the pipeline."""


class MagkeyError(Exception):
    """Base class for all magkey errors."""


class DomainError(MagkeyError, ValueError):
    """An argument violates an operation's domain (bounds, geometry, ranges)."""


class InsufficientDataError(MagkeyError):
    """Too few samples to compute a stable statistic."""


class IncompleteFingerprintError(MagkeyError):
    """Fingerprint build input does not cover the full grid."""


class IllConditionedAnchorsError(MagkeyError):
    """Anchor cells are too close in fingerprint space to fit a gain/offset map."""

    def __init__(self, axis: str, separation: float, minimum: float):
        self.axis = axis
        self.separation = separation
        self.minimum = minimum
        super().__init__(
            f"anchor cell means on axis {axis!r} differ by {separation:.4g} uT, "
            f"need at least {minimum:.4g} uT"
        )


class AmbiguousPolarityError(MagkeyError):
    """Reference window is too weak or orthogonal to decide polarity."""


class FormatError(MagkeyError):
    """File content does not match the documented format."""
