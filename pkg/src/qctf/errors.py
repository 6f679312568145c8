class QctfError(Exception):
    """Base class for package errors."""


class ConfigError(QctfError, ValueError):
    pass


class NonFinite(QctfError, ArithmeticError):
    """Propagation produced NaN/inf (degenerate parameters or a missed layer)."""


class SingularResidualCov(QctfError, ArithmeticError):
    """Residual covariance condition number exceeds the allowed limit."""


class NoTruth(QctfError):
    pass


class EmptySpace(QctfError, ValueError):
    pass


class DataError(QctfError):
    """Malformed event, track or config file."""
