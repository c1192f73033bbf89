"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class NewsloadError(Exception):
    exit_code = 1


class UsageError(NewsloadError):
    exit_code = 1


class ConfigError(UsageError):
    pass


class UnknownBaseline(UsageError):
    pass


class DataError(NewsloadError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class DuplicateTimestamp(ParseError):
    pass


class NonMonotonicTime(ParseError):
    pass


class FrameInvariantError(DataError):
    pass


class GapTooLong(DataError):
    pass


class MissingTargetTable(DataError):
    pass


class SpanTooShort(DataError):
    pass


class SimplexViolation(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class EmptyInput(DataError):
    pass


class AlignmentError(DataError):
    pass


class TooFewWindows(DataError):
    pass


class ModelError(NewsloadError):
    exit_code = 3


class ShapeMismatch(ModelError):
    pass


class CheckpointVersionMismatch(ModelError):
    pass


class NumericError(NewsloadError):
    exit_code = 4


class SingularDesign(NumericError):
    pass


class NonFiniteLoss(NumericError):
    def __init__(self, epoch, message="loss is not finite"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")


class NonFiniteGradient(NumericError):
    pass
