"""Exception types raised by the library.

Each class carries a stable ``code`` used by the CLI for machine-readable
error reporting.
"""


class VequilibError(Exception):
    """Base class for all library errors."""

    code = "Error"


class NotPositiveDefinite(VequilibError):
    """Interaction matrix has no Cholesky factorization with positive pivots."""

    code = "NotPositiveDefinite"


class DegenerateSupport(VequilibError):
    """A support piece collapses to a point or a support has no usable cells."""

    code = "DegenerateSupport"


class NonPositiveMass(VequilibError):
    """A prescribed component mass is zero or negative."""

    code = "NonPositiveMass"


class InfeasibleConstraint(VequilibError):
    """Upper-constraint caps cannot carry the prescribed mass."""

    code = "InfeasibleConstraint"


class UnclassifiableField(VequilibError):
    """Tail behaviour of an external field could not be classified numerically."""

    code = "UnclassifiableField"


class GridMismatch(VequilibError):
    """Operation received a grid of the wrong kind (plane vs sphere)."""

    code = "GridMismatch"


class NegativeRegularization(VequilibError):
    """Kernel regularization parameter must be nonnegative."""

    code = "NegativeRegularization"


class MassMismatch(VequilibError):
    """Candidate weights do not carry the prescribed component masses."""

    code = "MassMismatch"


class CapViolation(VequilibError):
    """Candidate weights exceed their per-cell caps."""

    code = "CapViolation"


class ExcludedAllCells(VequilibError):
    """All cells of a component were excluded by an infinite field value."""

    code = "ExcludedAllCells"


class UnknownScenario(VequilibError):
    """Requested builtin scenario does not exist."""

    code = "UnknownScenario"


class BadParams(VequilibError):
    """Scenario or run parameters are invalid."""

    code = "BadParams"
