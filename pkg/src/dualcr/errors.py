"""Exception types shared across the package."""


class DualCRError(Exception):
    """Base class for all errors raised by this package."""


# --- jet arithmetic ---------------------------------------------------------

class MismatchedJetSpaces(DualCRError):
    """Binary jet operation on jets with different variable count or order."""


class DivisionBySingularJet(DualCRError):
    """Divisor jet whose constant term is (relatively) too small to invert."""


class SingularPivot(DualCRError):
    """Implicit solve or linear solve hit a pivot below tolerance."""


# --- expressions ------------------------------------------------------------

class ParseError(DualCRError):
    """Syntax error in the expression mini-language.

    Carries the byte offset of the offending token and the set of token
    descriptions that would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = tuple(expected)


class IndexOutOfRange(DualCRError):
    """Symbol index outside 1..n for the ambient dimension in use."""


class ExprEvalError(DualCRError):
    """Expression cannot be evaluated in the given environment."""


# --- hypersurface geometry --------------------------------------------------

class NoHitZeroViolated(DualCRError):
    """The complex tangent hyperplane at this point passes (numerically)
    through the origin; the dual map is undefined there."""


class ProjectionDiverged(DualCRError):
    """Newton projection onto the surface failed to converge."""


class ChartError(DualCRError):
    """Chart construction produced an invalid parametrization."""


class RepairFailed(DualCRError):
    """Coordinate repair could not restore the pairwise nondegeneracy
    condition after the maximum number of random attempts."""


# --- tangential fields and forms --------------------------------------------

class DegenerateFrame(DualCRError):
    """No row choice yields a well-conditioned linear system for the
    tangential field coefficients."""


class ResidualTooLarge(DualCRError):
    """A consistency equation that should hold automatically (dropped row,
    reconstruction identity) failed beyond tolerance."""


class DegenerateDual(DualCRError):
    """The derivative of the dual map is too ill-conditioned on the maximal
    complex subspace to transport the complex structure."""


# --- incidence quadric ------------------------------------------------------

class NotTotallyReal(DualCRError):
    """The lifted tangent space is not totally real at this point."""
