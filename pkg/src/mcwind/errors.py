"""Exception hierarchy."""


class WindNoiseError(Exception):
    """Base class for all errors raised by mcwind."""


class ConfigurationError(WindNoiseError, ValueError):
    """Invalid parameters, window settings or filter coefficients."""


class ArgumentError(WindNoiseError, ValueError):
    """Arguments are individually valid but inconsistent (shapes, grids, empty data)."""


class ModelError(WindNoiseError, ArithmeticError):
    """The coherence model cannot be factorized, even after regularization."""

    def __init__(self, message, bin_index=None):
        super().__init__(message)
        self.bin_index = bin_index
