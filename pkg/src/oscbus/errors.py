"""Exception and warning types raised by the engine."""


class OscbusError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(OscbusError, ValueError):
    pass


class InvalidArgumentError(OscbusError, ValueError):
    pass


class UnsupportedTopologyError(OscbusError, ValueError):
    pass


class ConfigError(OscbusError, ValueError):
    """Raised for malformed or inconsistent experiment configurations.

    Args:
        message (str): human readable description
        path (str): dotted key path of the offending entry, if any
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericError(OscbusError):
    """Base class for failures of the numerical pipeline."""


class NotPositiveDefiniteError(NumericError, ValueError):
    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class NoSteadyStateError(NumericError):
    def __init__(self, message, eigenvalues=()):
        self.eigenvalues = tuple(eigenvalues)
        super().__init__(message)


class StructuralViolationError(NumericError):
    """The bath structure couples resonant modes to the rest of the network."""

    def __init__(self, message, modes=()):
        self.modes = tuple(modes)
        super().__init__(message)


class InvalidStateError(NumericError, ValueError):
    pass


class ConditioningWarning(UserWarning):
    pass


class RWAWarning(UserWarning):
    pass


class FidelityClampWarning(UserWarning):
    pass


class PerturbationBreakdownWarning(UserWarning):
    pass
