"""Exception types shared across the library."""


class NonFiniteError(ArithmeticError):
    """A numerical computation produced inf or NaN."""


class RhoTooSmallError(ValueError):
    """Fixed points F+/F- require rho > 1."""


class EigenFailureError(RuntimeError):
    """The 3x3 eigensolve did not converge."""


class DegenerateRangeError(ValueError):
    """A scaler component has zero spread in the fit data."""


class LengthMismatchError(ValueError):
    """Two sequences that must align have different lengths."""


class PerplexityInfeasibleError(ValueError):
    """The requested perplexity cannot be bracketed for this point set."""
