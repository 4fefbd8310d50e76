"""Exception hierarchy shared by every stage of the pipeline."""


class TrendForestError(Exception):
    """Base class for data and model errors (mapped to CLI exit status 2)."""


# market data

class EmptyInput(TrendForestError, ValueError):
    pass


class MalformedRow(TrendForestError, ValueError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"malformed row at line {line_no}: {reason}".rstrip(": "))


class DuplicateDate(TrendForestError, ValueError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"duplicate date {date}")


class NetworkError(TrendForestError, OSError):
    pass


class NonSuccessStatus(TrendForestError):
    def __init__(self, code):
        self.code = code
        super().__init__(f"server answered with HTTP status {code}")


# preprocessing / indicators

class EmptySeries(TrendForestError, ValueError):
    pass


class AlphaOutOfRange(TrendForestError, ValueError):
    pass


class HorizonTooLarge(TrendForestError, ValueError):
    pass


class SeriesTooShort(TrendForestError, ValueError):
    pass


class FlatWindow(TrendForestError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"highest high equals lowest low in window ending at bar {index}")


class LengthMismatch(TrendForestError, ValueError):
    pass


class NoUsableRows(TrendForestError, ValueError):
    pass


# separability / forest

class TooFewRows(TrendForestError, ValueError):
    pass


class SingleClassData(TrendForestError, ValueError):
    pass


class NotADistribution(TrendForestError, ValueError):
    pass


class EmptyChild(TrendForestError, ValueError):
    pass


class CountMismatch(TrendForestError, ValueError):
    pass


class BadMTry(TrendForestError, ValueError):
    pass


class NoOobRows(TrendForestError, ValueError):
    pass


class ModelFormatError(TrendForestError, ValueError):
    pass


# evaluation

class DegenerateSplit(TrendForestError, ValueError):
    pass


class SingleClassTruth(TrendForestError, ValueError):
    pass


class EmptyTestSet(TrendForestError, ValueError):
    pass


# configuration

class ParseError(TrendForestError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class RangeError(TrendForestError, ValueError):
    def __init__(self, field, reason=""):
        self.field = field
        super().__init__(f"{field}: {reason}" if reason else field)
