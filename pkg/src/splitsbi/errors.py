"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inputs do not fit together (dimensions, model/scheme pairing, config keys)."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NotConditionallyCIR(ValueError):
    """A species' dynamics are not affine in its own level.

    Raised when some reaction that changes species ``i`` has a propensity
    of degree two or more in ``x_i`` (or a Hill dependence on ``x_i``).
    """


class SimulationDiverged(RuntimeError):
    """A path produced non-finite values."""
