"""Exception hierarchy shared by all modules."""


class SymplabError(Exception):
    """Base class for library errors."""


class InvalidMapError(SymplabError, ValueError):
    pass


class UnsupportedOrderError(SymplabError, ValueError):
    pass


class PreconditionError(SymplabError, ValueError):
    """An input violates an operation's precondition."""


class ClassificationError(PreconditionError):
    pass


class ResonanceError(PreconditionError):
    pass


class InsufficientDataError(SymplabError, RuntimeError):
    pass


class WrongClassError(PreconditionError):
    pass


class NotFoundError(SymplabError, LookupError):
    pass


class IntegrityError(SymplabError, RuntimeError):
    """A closing construction crossed itself (evidence of a missed intersection)."""


class LiftInconsistencyError(SymplabError, ValueError):
    pass


class NonTransverseError(SymplabError, ValueError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class GeometryError(SymplabError, ValueError):
    pass


class AmplitudeTooLargeError(SymplabError, ValueError):
    def __init__(self, message, max_amplitude):
        super().__init__(message)
        self.max_amplitude = max_amplitude


class ShiftTooLargeError(SymplabError, ValueError):
    def __init__(self, message, max_shift):
        super().__init__(message)
        self.max_shift = max_shift


class ConfigError(SymplabError, ValueError):
    def __init__(self, message, key_path=None):
        super().__init__(message)
        self.key_path = key_path
