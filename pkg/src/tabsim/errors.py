"""Exception types raised across the package."""

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class IllConditionedError(np.linalg.LinAlgError):
    """The least-squares system could not be solved reliably."""

    def __init__(self, message, cond):
        super().__init__(f"{message} (condition estimate {cond:.3e})")
        self.cond = cond


class ParseError(ValueError):
    """A data file is malformed. ``line`` is 1-based, or None for whole-file problems."""

    def __init__(self, message, path=None, line=None):
        where = str(path) if path is not None else "<input>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
