"""Exception hierarchy shared across the package."""


class SemsearchError(Exception):
    """Base class for all package errors."""


class ShapeError(SemsearchError, ValueError):
    pass


class NumericError(SemsearchError, ArithmeticError):
    pass


class ContractError(SemsearchError, ValueError):
    """A caller violated an operation's precondition."""


class DataError(SemsearchError, ValueError):
    """Malformed or unusable input data."""


class FormatError(DataError):
    """A file does not follow its documented layout."""


class SamplingError(DataError):
    pass


class NumericWarning(RuntimeWarning):
    pass
