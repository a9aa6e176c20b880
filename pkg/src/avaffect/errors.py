"""Exception taxonomy shared across the package.

The CLI maps these onto its exit codes: DataError -> 2,
NumericalCheckError -> 3; argument problems exit 1.
"""


class AvaffectError(Exception):
    """Base class for all package errors."""


class DataError(AvaffectError):
    """Bad input data: missing/malformed files, contract violations."""


class ShapeError(AvaffectError):
    """Tensor/array shape or config mismatch."""


class NumericalCheckError(AvaffectError):
    """A numerical validation (gradient check, NaN scan) failed."""
