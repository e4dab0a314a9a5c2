"""
Exception hierarchy shared by every agent and the runner.
"""

from typing import Optional


class UlabError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(UlabError, ValueError):
    """A precondition on an operation's arguments does not hold."""


class UnknownOperationError(InvalidParameterError):
    pass


class BudgetExceededError(UlabError):
    """The requested computation exceeds the configured work budget."""

    def __init__(self, what: str, needed: float, budget: float):
        self.what = what
        self.needed = needed
        self.budget = budget
        super().__init__(f"{what}: needs {needed:.3g} units, budget is {budget:.3g}")


class RangeTooLargeError(BudgetExceededError):
    pass


class TableRangeError(UlabError):
    """A sum needs values outside the function table it was given."""


class NumericalFailureError(UlabError):
    """A quantity that is provably real / nonnegative came out otherwise."""


class CacheCorruptionError(UlabError):
    pass


class ConfigError(UlabError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(f"{where}{message}")
