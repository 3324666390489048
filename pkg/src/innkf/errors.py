"""Exception hierarchy.

The three top-level families map onto CLI exit codes: configuration
problems (2), bad input data (3) and numerical failures (4).
"""


class InnkfError(Exception):
    exit_code = 1


class ConfigError(InnkfError, ValueError):
    exit_code = 2


class DataError(InnkfError, ValueError):
    exit_code = 3


class NumericalError(InnkfError, ArithmeticError):
    exit_code = 4


# liegroup
class NotInAlgebra(NumericalError, ValueError):
    pass


class NotARotation(NumericalError, ValueError):
    pass


class NotInGroup(NumericalError, ValueError):
    pass


# contact
class SingularJacobian(NumericalError):
    pass


class BadNormal(ConfigError):
    pass


# inekf
class NonFiniteInput(NumericalError, ValueError):
    pass


class UnknownContact(InnkfError, KeyError):
    exit_code = 4


class DuplicateContact(InnkfError, KeyError):
    exit_code = 4


class SingularInnovation(NumericalError):
    pass


# seggn
class ShapeMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


# sim
class UnreachableGait(ConfigError):
    pass


class IkFailure(NumericalError):
    pass


# simio
class SchemaVersionMismatch(DataError):
    pass


class CorruptRecord(DataError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# metrics
class LengthMismatch(DataError):
    pass


class TooShort(DataError):
    pass
