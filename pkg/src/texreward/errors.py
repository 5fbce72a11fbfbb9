"""Exception and warning types shared across the package."""


class TexRewardError(Exception):
    """Base class for all texreward errors."""


class ObjParseError(TexRewardError):
    """Malformed OBJ input. Carries the 1-based line number when known."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class MissingUVError(ObjParseError):
    """Face corner without a texture-coordinate index."""


class UnsupportedFaceError(ObjParseError):
    """Face with a corner count other than 3."""


class MeshValidationError(TexRewardError):
    """Mesh violates a structural invariant (bad index, UV out of range, ...)."""


class DegenerateTriangleError(TexRewardError):
    """Operation on a triangle with (near-)zero area."""


class EmptyFieldError(TexRewardError):
    """UV vector field has no valid anchor."""


class RewardInputError(TexRewardError):
    """Reward inputs unusable: missing context, dimension mismatch, empty pairs,
    or zero covered texels."""


class GimbalLockError(TexRewardError):
    """Camera up vector parallel to the viewing direction."""


class NonFiniteGradientError(TexRewardError):
    """A reward term produced a NaN/Inf gradient. Carries the term kind."""

    def __init__(self, term_kind, message=None):
        self.term_kind = term_kind
        super().__init__(message or f"non-finite gradient in term '{term_kind}'")


class TexRewardWarning(UserWarning):
    """Category for non-fatal diagnostics (ignored OBJ directives, dropped
    degenerate faces, near-singular poses, ...)."""
