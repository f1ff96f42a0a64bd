"""Exception hierarchy shared across the toolkit."""


class DlfaultError(Exception):
    """Base class for all toolkit errors."""


# -- trace parsing ------------------------------------------------------------

class MalformedRecord(DlfaultError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaMismatch(DlfaultError):
    pass


class EmptyTrace(DlfaultError):
    pass


class TraceTooShort(DlfaultError):
    pass


# -- statistics ---------------------------------------------------------------

class TooFewSamples(DlfaultError):
    pass


# -- classifiers --------------------------------------------------------------

class EmptyDataset(DlfaultError):
    pass


class InvalidParams(DlfaultError):
    pass


class ModelNotFitted(DlfaultError):
    pass


class DimensionMismatch(DlfaultError):
    pass


# -- mutation -----------------------------------------------------------------

class UnknownLoss(DlfaultError):
    pass


class NoMutableTarget(DlfaultError):
    pass


class EvaluatorFailure(DlfaultError):
    def __init__(self, message, spec=None):
        super().__init__(message)
        self.spec = spec


class ExhaustedOperators(DlfaultError):
    pass


# -- localizer ----------------------------------------------------------------

class ParseError(DlfaultError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
