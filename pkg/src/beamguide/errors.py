"""Exception hierarchy shared by all modules."""


class BeamGuideError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(BeamGuideError, ValueError):
    """Shapes of two operands do not agree.

    ``source_index`` is set when the offending operand is one source of a set.
    """

    def __init__(self, message, source_index=None):
        super().__init__(message)
        self.source_index = source_index


class ConfigError(BeamGuideError, ValueError):
    """Invalid configuration or parameter value."""


class NumericalError(BeamGuideError, ArithmeticError):
    """Non-finite values or a failed factorization."""


class EstimatorError(BeamGuideError):
    """An estimator could not produce output (missing truth, manifest entry, guidance)."""


class WavFormatError(BeamGuideError):
    """Malformed or unsupported WAV file."""


class ManifestError(BeamGuideError):
    """Manifest JSON is missing fields or references unusable files."""


class DegenerateSignalError(BeamGuideError, ValueError):
    """A reference signal carries no energy where the metric needs some."""
