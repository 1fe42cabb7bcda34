"""Exception hierarchy shared by all modules."""


class SliceOrchError(Exception):
    """Base class for package errors."""


class ConfigError(SliceOrchError, ValueError):
    """A scenario or sweep configuration is invalid.

    ``field`` names the offending field when one can be identified.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ContractViolation(SliceOrchError, ValueError):
    """An operation was called outside its precondition (e.g. an infeasible action)."""


class ConvergenceError(SliceOrchError, RuntimeError):
    """An iterative method hit its iteration cap before meeting its tolerance."""

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class UnsupportedModelError(SliceOrchError, ValueError):
    """A closed form was requested for a model it does not cover."""
