"""Shared exception types."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, unknown keys, incompatible options."""


class UnboundParameterError(ConfigurationError):
    """A circuit references a parameter id that is not bound by the parameter set."""


class UnsupportedGradientError(ValueError):
    """A trainable parameter appears in a gate the shift rule cannot differentiate."""


class EpisodeDoneError(RuntimeError):
    """step() was called on an environment whose episode already terminated."""


class LayoutError(ValueError):
    """A gridworld layout file is malformed."""


class DegenerateDistributionError(ArithmeticError):
    """A policy produced a distribution that cannot be normalized."""


class NumericalGuardError(ArithmeticError):
    """A numerical guard tripped (e.g. log of a zero-probability action)."""
