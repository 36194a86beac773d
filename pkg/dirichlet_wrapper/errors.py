# errors.py

"""
Error Types

Exception hierarchy shared by every module of the Dirichlet wrapper toolkit.
Library code raises these; only the command-line entry point turns them into
console messages and exit codes.

Classes:
    - DirichletWrapperError: Base class for all toolkit errors.
    - DomainError: Argument outside the mathematical domain of a function.
    - NumericError: Iterative computation failed to converge or produced non-finite values.
    - ConfigError: Invalid configuration, flags, or dataset-level preconditions.
    - ShapeError: Array or network dimensions do not match.
    - PredictionLookupError: Example id not present in a prediction store.
    - TransportError: Remote prediction service failed or answered malformed data.
    - ParseError: Malformed line in an input file.
"""

from typing import Optional


class DirichletWrapperError(Exception):
    """Base class for all errors raised by the toolkit."""


class DomainError(DirichletWrapperError, ValueError):
    """Raised when a function is evaluated outside its domain."""


class NumericError(DirichletWrapperError, ArithmeticError):
    """
    Raised when a numerical procedure does not converge or yields non-finite values.

    Args:
        message (str): Human readable description.
        params (dict, optional): The parameters that triggered the failure.
    """

    def __init__(self, message: str, params: Optional[dict] = None):
        super().__init__(message)
        self.params = dict(params or {})


class ConfigError(DirichletWrapperError):
    """Raised for invalid settings or unusable input data."""


class ShapeError(DirichletWrapperError, ValueError):
    """Raised when dimensions of vectors, matrices or networks disagree."""


class PredictionLookupError(DirichletWrapperError, KeyError):
    """Raised when a prediction store has no record for an example id."""

    def __str__(self) -> str:
        # KeyError would quote the message
        return str(self.args[0]) if self.args else ""


class TransportError(DirichletWrapperError):
    """
    Raised when a remote black-box cannot be reached or returns invalid data.

    Args:
        message (str): Human readable description.
        endpoint (str): URL of the prediction service.
        example_id (str, optional): Id of the first example that could not be predicted.
    """

    def __init__(self, message: str, endpoint: str, example_id: Optional[str] = None):
        super().__init__(f"{message} (endpoint={endpoint}, example_id={example_id})")
        self.endpoint = endpoint
        self.example_id = example_id


class ParseError(DirichletWrapperError, ValueError):
    """
    Raised when an input file line cannot be parsed.

    Args:
        message (str): Human readable description.
        path (str): File being read.
        line_number (int): 1-based line number of the offending line.
    """

    def __init__(self, message: str, path: str, line_number: int):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number
