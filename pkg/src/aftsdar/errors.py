"""Exception hierarchy. Each category carries the CLI exit code it maps to."""


class AftSdarError(Exception):
    exit_code = 1


class UsageError(AftSdarError):
    exit_code = 1


class InputDataError(AftSdarError, ValueError):
    exit_code = 2


class CsvFormatError(InputDataError):
    """Malformed dataset file; ``row`` is 1-based counting the header as row 1."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = f"[{', '.join(loc)}] " if loc else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class NumericalError(AftSdarError, ArithmeticError):
    exit_code = 3


class DegenerateDesignError(NumericalError):
    pass


class OverdeterminedSupportError(NumericalError):
    pass


class FoldDegeneracyError(NumericalError):
    def __init__(self, fold, message):
        super().__init__(f"fold {fold}: {message}")
        self.fold = fold


class CalibrationError(NumericalError):
    pass


class UndefinedMetricError(NumericalError):
    pass


class DiagnosticsInfeasibleError(AftSdarError):
    exit_code = 4
