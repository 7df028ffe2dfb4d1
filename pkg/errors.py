class UrpError(RuntimeError):
    """Base class for every error raised by the simulator."""


class DimensionError(UrpError, ValueError):
    """Operator/state dimensions disagree, overflow the cap, or a label is invalid."""


class FrameError(UrpError, ValueError):
    pass


class IntegrationError(UrpError):
    """The integrator gave up: step-size underflow or trace drift."""


class ConfigError(UrpError, ValueError):
    pass


class ResultsMissingError(UrpError):
    pass
