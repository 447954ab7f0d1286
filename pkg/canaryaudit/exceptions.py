"""
Error types raised by canaryaudit
"""


class AuditError(ValueError):
    """Base class for all canaryaudit errors"""


class InvalidInputError(AuditError):
    """An argument is outside its documented domain"""


class OrderExceedsDimensionError(AuditError):
    """A moment or interval order larger than the number of tests was requested"""


class SensitivityViolationError(AuditError):
    """A dataset row exceeds the unit l2 norm the mechanism is calibrated for"""


class InvalidBracketError(AuditError):
    """Root-finding bracket with a > b"""


class NumericalError(AuditError):
    """An internal numerical invariant was broken"""


class StatMatrixParseError(InvalidInputError):
    """A statistics CSV file could not be parsed"""


class ConfigError(InvalidInputError):
    """Configuration value is malformed or violates an invariant"""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
