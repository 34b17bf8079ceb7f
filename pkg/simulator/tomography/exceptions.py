class TomographyError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidDimensionError(TomographyError, ValueError):
    pass


class UnsupportedDimensionError(InvalidDimensionError):
    """The dimension is valid but the requested construction does not cover it."""


class DimensionMismatchError(TomographyError, ValueError):
    pass


class InvalidStateError(TomographyError, ValueError):
    """An array violates the Ket or DensityMatrix invariants."""


class DegenerateVectorError(TomographyError, ArithmeticError):
    """Normalization of a (near) zero vector was requested."""


class DegenerateParameterError(TomographyError, ArithmeticError):
    pass


class ZeroCountsError(TomographyError):
    """N+ + N- = 0: the count ratio is undefined for this iteration."""


class ChannelError(TomographyError):
    """The measurement model produced a non-finite probability."""


class ResolutionError(TomographyError):
    """The sampling grid cannot represent a mode to the required accuracy."""


class ConfigurationError(TomographyError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__('; '.join(self.errors))


class TrialFailure(TomographyError):
    """A trial raised; carries what is needed to replay it."""

    def __init__(self, index, seed, cause):
        self.index = index
        self.seed = seed
        self.cause = cause
        super().__init__(
            f"trial {index} failed (master seed {seed}, replay with --replay {index}): "
            f"{cause.__class__.__name__}: {cause}"
        )
