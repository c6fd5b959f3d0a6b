"""Exception hierarchy. The CLI maps each family to an exit code."""


class MsgcovError(Exception):
    """Base class for all library errors."""


class ConfigError(MsgcovError, ValueError):
    """Bad configuration or argument (CLI exit code 2)."""


class DataError(MsgcovError, ValueError):
    """Input data unusable (CLI exit code 3)."""


class DimensionError(DataError):
    pass


class DegenerateFeatureError(DataError):
    """A feature has zero sample variance, or a pair scatter is singular."""


class NumericalError(MsgcovError, ArithmeticError):
    """A computation produced non-finite or otherwise invalid numbers (CLI exit code 4)."""
