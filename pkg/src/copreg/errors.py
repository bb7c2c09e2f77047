"""Semantic exception hierarchy shared across the package."""


class CopregError(Exception):
    """Base class for all library errors."""


class ShapeError(CopregError):
    """Array dimensions do not compose or do not match a contract."""


class DomainError(CopregError):
    """Scalar argument outside its mathematical domain (e.g. u not in (0,1))."""


class DegenerateMarginError(CopregError):
    """Response sample carries no spread; a margin cannot be estimated."""


class DivergenceError(CopregError):
    """Network training produced a non-finite loss."""


class NumericalError(CopregError):
    """Linear-algebra failure that jitter could not repair."""


class SimulationDivergedError(CopregError):
    """Simulator state exceeded its configured cap."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class ConfigError(CopregError):
    """Invalid experiment configuration."""


class DataError(CopregError):
    """Malformed or missing input data."""
