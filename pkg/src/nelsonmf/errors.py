"""Error types shared across the suite.

The command line maps these to exit codes: ConfigError -> 2,
NumericalError (and subclasses) -> 3, BudgetError -> 4.
"""


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


class NumericalError(RuntimeError):
    """A run produced non-finite values or violated a stability guard."""


class UnstableStepError(NumericalError):
    """Orbital Gram matrix drifted past its guard; the time step is unstable."""


class TruncationError(NumericalError):
    """State weight outside the truncated boson space exceeded its threshold."""


class BudgetError(RuntimeError):
    """A requested basis or workload exceeds the configured budget."""
