"""Exception hierarchy shared by all chemolab modules."""


class ChemoLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(ChemoLabError, ValueError):
    pass


class NonConvergence(ChemoLabError, RuntimeError):
    """An iterative linear solve exhausted its iteration budget."""


class SingularSensitivity(ChemoLabError, ValueError):
    """The signal reached zero where v**(-lambda) must be evaluated."""


class CflViolation(ChemoLabError, ValueError):
    pass


class DomainViolation(ChemoLabError, ValueError):
    """A threshold formula was evaluated outside its domain of definition."""


class UndefinedEnergy(ChemoLabError, ValueError):
    pass


class InsufficientData(ChemoLabError, ValueError):
    pass


class Unsupported(ChemoLabError, ValueError):
    pass


class InvalidAmplitude(ChemoLabError, ValueError):
    pass


class ConfigError(ChemoLabError, ValueError):
    pass


class IoError(ChemoLabError, OSError):
    """Run output could not be written."""
