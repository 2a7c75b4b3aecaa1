"""Exception hierarchy shared across the package."""


class PnlssError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PnlssError, ValueError):
    """Invalid configuration, arguments, or a violated operation contract."""


class NumericalError(PnlssError, ArithmeticError):
    """Numerical failure: singularity, non-finite cost, undefined metric."""


class DivergenceError(NumericalError):
    """A simulation state grew past the divergence threshold."""

    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class DataFormatError(PnlssError, ValueError):
    """Malformed data file or record on disk."""
