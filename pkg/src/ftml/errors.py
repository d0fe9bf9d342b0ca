"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes, so callers can tell a bad argument
(usage bug) from a diverging computation (numeric failure).
"""


class ParameterError(ValueError):
    """An argument violates an operation's preconditions."""


class ContractError(ParameterError):
    """An input breaks a documented structural contract (e.g. symmetry)."""


class StateError(RuntimeError):
    """Operation invoked on unusable state (empty dataset, exhausted stream)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or diverged."""


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""
