"""Exception hierarchy shared by every engine."""


class ChiralNetError(Exception):
    """Base class; carries an optional dict of diagnostic values."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), **self.details}


class DimensionError(ChiralNetError, ValueError):
    pass


class StateValidationError(ChiralNetError, ValueError):
    pass


class ParameterError(ChiralNetError, ValueError):
    pass


class IntegrationError(ChiralNetError, RuntimeError):
    pass


class QuadratureError(ChiralNetError, RuntimeError):
    pass


class BandEdgeError(ChiralNetError, ValueError):
    pass


class DegenerateRootsError(ChiralNetError, ValueError):
    pass


class KrylovError(ChiralNetError, RuntimeError):
    pass


class TraceDriftError(IntegrationError):
    pass


class ConfigError(ChiralNetError, ValueError):
    """Raised with the full list of violations in ``details['violations']``."""
