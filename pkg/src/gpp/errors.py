"""Exception types shared across the package."""


class GPPError(Exception):
    """Base class for package errors."""


class DimensionMismatch(GPPError, ValueError):
    pass


class ShapeMismatch(GPPError, ValueError):
    pass


class IndexOutOfRange(GPPError, IndexError):
    pass


class ModelMismatch(GPPError, ValueError):
    """Recovery engine called on a bundle from the wrong forward model."""


class EmptyInput(GPPError, ValueError):
    pass


class EmptyDataset(EmptyInput):
    pass


class SingularSystem(GPPError, ArithmeticError):
    pass


class FormatError(GPPError, ValueError):
    """Malformed or unsupported binary file."""
