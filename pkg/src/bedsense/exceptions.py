"""Exception hierarchy for bedsense."""


class BedsenseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(BedsenseError, ValueError):
    """Invalid bounds, sizes, or configuration values."""


class DegenerateUpdateError(BedsenseError, ArithmeticError):
    """A Bayes update left no posterior mass on any particle."""


class ContractError(BedsenseError, ValueError):
    """A call violated an operation precondition (e.g. a control outside the grid)."""
