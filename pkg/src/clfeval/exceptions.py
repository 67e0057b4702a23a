"""Exception hierarchy shared by the library and the CLI."""


class ClfEvalError(ValueError):
    """Base class for all data errors raised by clfeval."""


class EmptyInputError(ClfEvalError):
    pass


class UnknownLabelError(ClfEvalError):
    def __init__(self, label, line=None):
        self.label = label
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown label {label!r}{where}")


class LabelSpaceMismatchError(ClfEvalError):
    pass


class ZeroMassError(ClfEvalError):
    pass


class ZeroPrevalenceError(ClfEvalError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"class {label!r} has zero prevalence")


class UndefinedMetricError(ClfEvalError):
    """The metric has no value on this matrix (e.g. a zero denominator)."""


class UnknownMetricError(ClfEvalError):
    pass


class UnsupportedMetricError(ClfEvalError):
    pass


class DomainError(ClfEvalError):
    """Matrix lies on or outside the boundary where an operation is defined."""


class InputFormatError(ClfEvalError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
