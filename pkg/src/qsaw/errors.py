"""Exception hierarchy shared by all qsaw modules."""


class QsawError(Exception):
    """Base class for every error raised by qsaw."""


class ParamsError(QsawError, ValueError):
    pass


class OverconstrainedParams(ParamsError):
    """All of K, k, T were given and K != k*T."""


class InvalidTorus(ParamsError):
    """T is not 2*pi*L/N for an integer L in torus mode."""


class InvalidMomentum(ParamsError):
    """Initial momentum level outside [-N/2, N/2)."""


class InvalidHorizon(QsawError, ValueError):
    pass


class InvalidEnsemble(QsawError, ValueError):
    pass


class WrongBasis(QsawError, ValueError):
    """Operation applied to a state in the wrong representation."""


class WidthMismatch(QsawError, ValueError):
    """Circuit register width differs from the state register width."""


class NotNormalized(QsawError, ValueError):
    pass


class InsufficientSupport(QsawError, ValueError):
    pass


class NonDecaying(QsawError, ValueError):
    pass


class InsufficientData(QsawError, ValueError):
    pass


class NonPositiveVariance(QsawError, ValueError):
    pass


class NonPositiveK(QsawError, ValueError):
    pass


class ConfigError(QsawError, ValueError):
    pass


class NumericalFailure(QsawError, RuntimeError):
    pass
