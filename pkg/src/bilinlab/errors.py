"""Exception hierarchy shared by all modules."""


class BilinlabError(Exception):
    """Base class for every error raised by the library."""


class DomainError(BilinlabError, ValueError):
    """A point lies outside the validity box of a phase or amplitude."""


class DegeneracyError(BilinlabError):
    """A mixed Hessian (or one of its blocks) is rank deficient."""


class ResolutionError(BilinlabError):
    """A grid step is too coarse for the oscillation it has to resolve."""

    def __init__(self, axis, step, limit):
        self.axis = axis
        self.step = step
        self.limit = limit
        super().__init__(f"axis {axis!r}: step {step:.3e} exceeds resolution limit {limit:.3e}")


class AliasingError(ResolutionError):
    """A frequency band does not fit under the Nyquist limit of the grid."""

    def __init__(self, message):
        BilinlabError.__init__(self, message)


class CausticError(BilinlabError):
    """The ray flow map stopped being a diffeomorphism."""

    def __init__(self, s, jacobian):
        self.s = s
        self.jacobian = jacobian
        super().__init__(f"flow Jacobian {jacobian:.3e} below threshold at s = {s:.4g}")


class AccuracyError(BilinlabError):
    """A self-check (e.g. the eikonal residual) exceeded its tolerance."""


class DiscretizationError(BilinlabError):
    """A discretized operator lost a structural property it must have."""


class ScaleError(BilinlabError):
    """A problem exceeds the desk-scale caps of an operation."""


class PreconditionError(BilinlabError):
    """A hypothesis of the estimate under test does not hold."""


class ArgumentOrderError(BilinlabError, ValueError):
    """Scales passed in the wrong order (the caller must sort them)."""


class FitError(BilinlabError, ValueError):
    """Sample table unsuitable for a power-law fit."""


class FitDomainError(FitError):
    """Sample table spans too little of the abscissa axis."""


class EmptyBandError(BilinlabError, ValueError):
    """A projection left no energy, so a normalized ratio is undefined."""


class UsageError(BilinlabError, ValueError):
    """Invalid experiment configuration or command line."""
