"""Exception hierarchy shared across the package.

Each top-level class maps to one CLI exit code.
"""


class PdquboError(Exception):
    """Base class for all package errors."""


class ConfigError(PdquboError):
    """Invalid experiment or solver configuration."""


class DataError(PdquboError):
    """Problem with input data files or their contents."""


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyDatasetError(DataError):
    pass


class NoEvaluableUsersError(DataError):
    pass


class QMatrixError(PdquboError):
    """Coefficient matrix failed validation."""


class SolverError(PdquboError):
    """Solver could not produce a result."""


class TransportError(SolverError):
    """External sampler endpoint could not be reached."""


class ProtocolError(SolverError):
    """External sampler returned a malformed response."""
