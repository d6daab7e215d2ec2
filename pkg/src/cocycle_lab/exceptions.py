"""Exception types shared across the package."""


class CocycleError(Exception):
    """Base class for all package errors."""


class NonInvertible(CocycleError):
    """A cocycle value had |det| below the configured floor."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ProductOverflow(CocycleError, OverflowError):
    """A renormalized product still produced non-finite entries."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonFiniteObservable(CocycleError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonPositiveDenominator(CocycleError):
    """a_theta - c_theta * u_theta(Tx) <= 0: theta is outside the usable window."""


class Inconclusive(CocycleError):
    """A fixed-point iteration did not settle within its step budget."""


class ConfigError(CocycleError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.field = field
        self.line = line
