"""Exception hierarchy shared by all quicflow modules."""


class QuicflowError(Exception):
    """Base class for every error raised by this package."""


class FlowTooShort(QuicflowError):
    pass


class ParseError(QuicflowError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(QuicflowError):
    pass


class UnsupportedFormat(QuicflowError):
    pass


class InvalidProfile(QuicflowError):
    pass


class DegenerateSequence(QuicflowError):
    pass


class EmptyInput(QuicflowError):
    pass


class InsufficientPackets(QuicflowError):
    pass


class DegenerateDataset(QuicflowError):
    pass


class NonFinite(QuicflowError):
    pass


class DimensionMismatch(QuicflowError):
    pass


class LengthMismatch(QuicflowError):
    pass


class TooManyFeatures(QuicflowError):
    pass


class EmptyEvaluation(QuicflowError):
    pass


class DatasetTooSmall(QuicflowError):
    pass


class UnknownFeature(QuicflowError):
    pass


class ConfigError(QuicflowError):
    pass


class DegenerateColumnWarning(UserWarning):
    """A column had a single distinct value and was mapped to bin 0."""
