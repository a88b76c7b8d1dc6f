"""Exception types raised across the package."""


class HyperclError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(HyperclError, ValueError):
    """A configuration value is out of range or inconsistent."""


class ShapeError(HyperclError, ValueError):
    """Operands have incompatible shapes or dimensions."""


class NumericalError(HyperclError, FloatingPointError):
    """A NaN or infinity appeared where finite values are required."""


class DegenerateInputError(HyperclError, ValueError):
    """The input is too small or too uniform for the requested computation."""


class DatasetFormatError(HyperclError, ValueError):
    """A file could not be parsed or failed validation.

    ``where`` carries a field path (``hyperedges[3][1]``) or a line number
    so the diagnostic can point at the offending value.
    """

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
