"""Exception types shared across the package."""


class QBStochError(Exception):
    """Base class for all package errors."""


class ValidationError(QBStochError, ValueError):
    """An argument has an admissible type but an inadmissible value."""


class StructuralError(QBStochError, ValueError):
    """Shapes, dimensions or grids of the inputs do not fit together."""


class CapacityError(QBStochError, ValueError):
    """The request exceeds what an exact (enumerating) routine can handle."""


class CouplingError(QBStochError, RuntimeError):
    """Two computations that must share noise were driven by different noise."""
