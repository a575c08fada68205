"""Exception hierarchy shared by all rsle modules."""


class RsleError(Exception):
    """Base class for every error raised by this package."""


class BranchCutError(RsleError, ValueError):
    """Argument lies on a branch cut that the function refuses to resolve."""


class ConvergenceError(RsleError, ArithmeticError):
    """An iterative solver did not reach its tolerance."""


class DomainError(RsleError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class BracketError(RsleError, ValueError):
    """Root bracket does not contain a sign change."""


class SingularEvaluation(RsleError, ArithmeticError):
    """Evaluation at (or numerically at) a pole."""


class CollisionError(RsleError, ArithmeticError):
    """Particles came closer than the gap floor despite sub-stepping."""


class StepFailure(RsleError, ArithmeticError):
    """Adaptive ODE refinement could not control the local error."""


class BranchAmbiguity(RsleError, ArithmeticError):
    """Continuation could not decide between two nearby fixed points."""


class FitError(RsleError, ValueError):
    """Too few samples to perform a requested fit."""


class QuadratureError(RsleError, ArithmeticError):
    """Numerical integration failed to converge."""


class SwallowedError(RsleError, ValueError):
    """Observable requested for a point already swallowed by the hull."""
