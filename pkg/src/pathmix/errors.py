"""Exception types shared across the package."""


class InvalidConfigError(ValueError):
    """A configuration value violates its contract (bad K, odd S, T < 2, ...)."""


class DegenerateTimestepError(ValueError):
    """An operation that requires t >= 1 was called at t = 0."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite math was required."""


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""
