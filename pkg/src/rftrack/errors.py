"""Exception and warning types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or scenario configuration."""


class DegenerateGeometryError(ValueError):
    """A tracker coincides with the evaluated target position."""


class QuadratureError(ArithmeticError):
    """Numerical integration of the transmit-branch density failed."""


class NumericalWarning(RuntimeWarning):
    """A matrix had to be regularized or a fallback path was taken."""
