"""Exception types raised by :mod:`tsiv`."""


class TsivError(Exception):
    """Base class for all library errors."""


class DimensionError(TsivError, ValueError):
    """Array shapes do not agree with each other or with a block layout."""


class UnstableProcessError(TsivError, ValueError):
    """The VAR coefficients violate the stability condition."""


class RejectionBudgetExceeded(TsivError, RuntimeError):
    """Rejection sampling of random coefficient matrices gave up."""


class RankDeficientError(TsivError, ArithmeticError):
    """An instrument/regressor cross moment does not have full row rank."""


class SingularWeightError(TsivError, ArithmeticError):
    """The GMM weight matrix could not be formed."""


class ConfigError(TsivError, ValueError):
    """Invalid experiment configuration."""
