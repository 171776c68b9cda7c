"""Exception hierarchy.

`DataError` covers bad inputs (CLI exit code 2), `NumericalError` covers
fits and training runs that fail numerically (CLI exit code 3).
"""


class CalibrationError(Exception):
    pass


class DataError(CalibrationError, ValueError):
    pass


class InvalidInputError(DataError):
    pass


class InvalidTemperatureError(DataError):
    pass


class InvalidSmoothingError(DataError):
    pass


class ShapeError(DataError):
    pass


class ParseError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class InvalidSpecError(DataError):
    pass


class InfeasibleSpecError(InvalidSpecError):
    pass


class UndefinedMetricError(DataError):
    pass


class WrongBinningError(DataError):
    pass


class NumericalError(CalibrationError, ArithmeticError):
    pass


class FitFailureError(NumericalError):
    pass


class TrainingDivergedError(NumericalError):
    pass
