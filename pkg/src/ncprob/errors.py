"""Exception types shared across the package.

Everything numerical raises NumericalFailure (CLI exit code 3); everything
about malformed or out-of-contract input raises ValidationFailure (exit 2).
"""


class ValidationFailure(ValueError):
    """Bad input: wrong shape, out-of-range size, malformed file."""


class SizeCapError(ValidationFailure):
    """Requested size exceeds the supported desk-scale cap."""


class UnsupportedStructureError(ValidationFailure):
    """Structurally valid input outside the operation's domain
    (e.g. crossing partition fed to a nesting-order routine)."""


class DimensionMismatchError(ValidationFailure):
    """Matrix/tensor dimensions do not line up."""


class NumericalFailure(RuntimeError):
    """A numerical procedure failed to meet its accuracy contract."""


class FlowDivergenceError(NumericalFailure):
    """Fixed-point / ODE integration did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
