"""Exception types shared across the package."""


class QctrlError(Exception):
    """Base class for errors raised by qctrl."""


class NumericalError(QctrlError, ArithmeticError):
    """Non-finite propagator or a state corrupted by round-off."""


class DegenerateInputError(QctrlError, ValueError):
    """Mixing angles or eigenstates requested where both pulses vanish."""


class ConfigError(QctrlError, ValueError):
    """Malformed or invalid experiment configuration.

    ``field`` and ``line`` locate the problem when they are known.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def to_dict(self):
        return {"error": "config", "message": str(self), "field": self.field, "line": self.line}
