"""Exception types raised by the simulator."""


class MGateError(Exception):
    """Base class for all simulator errors."""


class InvalidParamsError(MGateError, ValueError):
    pass


class NormalizationError(MGateError, ValueError):
    pass


class UndefinedPhaseError(MGateError, ValueError):
    """A field coherence is too small for its argument to be meaningful."""


class SingularParametersError(MGateError, ValueError):
    """The perturbative expression sits on a two-photon resonance pole."""


class ConfigError(MGateError, ValueError):
    pass


class IntegrationError(MGateError, RuntimeError):
    """The ODE integrator gave up.

    Attributes:
        last_time: last time (µs) at which the state is known to be good.
        partial: whatever the caller managed to compute before the failure,
            or None.
    """

    def __init__(self, message, last_time=0.0, partial=None):
        super().__init__(message)
        self.last_time = float(last_time)
        self.partial = partial
