"""Error taxonomy shared by all modules.

DomainError: a caller violated a precondition (bad argument, bad config).
DataError:   an input file or dataset is malformed or inconsistent.
NumericError: a computation produced NaN/Inf or was otherwise numerically
              invalid.
"""


class DomainError(ValueError):
    pass


class DataError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass
