"""Exception hierarchy shared by every homoglab module.

Two families are distinguished so that the command line front end can map them
onto exit codes: :class:`InputRejection` for data the user supplied (exit 2) and
:class:`InvariantViolation` for numerical checks that failed on valid input
(exit 1).
"""


class HomoglabError(Exception):
    """Base class for all homoglab errors."""


class InputRejection(HomoglabError, ValueError):
    """Raised when user supplied data fails a guard."""


class InvariantViolation(HomoglabError, RuntimeError):
    """Raised when a computed object breaks one of its invariants."""


# input rejections


class EllipticityViolation(InputRejection):
    pass


class AsymmetricCoefficient(InputRejection):
    pass


class IncommensurateWindow(InputRejection):
    pass


class ResolutionTooCoarse(InputRejection):
    pass


class MonotonicityUnavailable(InputRejection):
    """Cross-term dominance fails, no monotone 7-point stencil exists."""


class RationalSlope(InputRejection):
    pass


class NegativeInput(InputRejection):
    pass


class GridMismatch(InputRejection):
    pass


class DegenerateFit(InputRejection):
    """Order fit requested on exact (or non-positive) error data."""


class ConfigParse(InputRejection):
    pass


# invariant violations


class NullSpaceDimension(InvariantViolation):
    pass


class NonPositive(InvariantViolation):
    pass


class NoConvergence(InvariantViolation):
    pass


class Insolvable(InvariantViolation):
    pass


class IndefiniteEffectiveMatrix(InvariantViolation):
    pass


class SolverDivergence(InvariantViolation):
    pass


class NonNegativityViolation(InvariantViolation):
    pass


class BoundViolation(InvariantViolation):
    pass


class SearchExhausted(InvariantViolation):
    pass


class MaximumPrincipleViolation(InvariantViolation):
    pass


class OscillationNotDecaying(InvariantViolation):
    """Diagnostic only: recorded in sweep reports, never raised by a sweep."""


def exit_code(error: BaseException) -> int:
    r"""Maps an exception onto the process exit status.

    Returns:
        int: 2 for input rejections, 1 for everything else.
    """
    if isinstance(error, InputRejection):
        return 2
    return 1
