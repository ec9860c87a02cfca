"""Exception hierarchy shared by the estimators and numerical routines."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NotPSDError(DomainError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class DegenerateSampleError(ValueError):
    """A sample makes a quadratic-form weight vanish (e.g. ``x_i = 0``)."""


class NonConvergenceError(RuntimeError):
    """A fixed-point iteration exhausted its iteration budget.

    Attributes
    ----------
    last_iterate : ndarray
        Iterate reached when the budget ran out.
    residual : float
        Convergence metric of ``last_iterate``.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, last_iterate=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


class AccuracyError(RuntimeError):
    """Numerical integration could not reach the requested tolerance.

    Attributes
    ----------
    estimate : float or ndarray
        Best available estimate.
    error_bound : float
        Error bound reported by the integrator.
    """

    def __init__(self, message, estimate=None, error_bound=float("nan")):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class IllConditionedError(RuntimeError):
    """A linear system is too close to singular to be solved reliably."""
