"""Exception types shared across the package."""


class FracYamError(Exception):
    """Base class for package errors."""


class DomainError(FracYamError, ValueError):
    """Input outside the mathematical domain of an operation."""


class NonFiniteError(FracYamError, FloatingPointError):
    """A field evaluator returned NaN or inf at a quadrature node."""


class ConvergenceError(FracYamError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


class FitError(FracYamError, RuntimeError):
    """A least-squares fit was too ill-conditioned to trust."""
