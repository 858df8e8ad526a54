"""Exception types raised across pinlab."""


class PinlabError(Exception):
    """Base class for all library errors."""


class NonSummable(PinlabError, ValueError):
    pass


class InvalidHorizon(PinlabError, ValueError):
    pass


class OutOfRange(PinlabError, IndexError):
    pass


class NoConvergence(PinlabError, RuntimeError):
    pass


class NotPositiveDefinite(PinlabError, ValueError):
    pass


class EmbeddingNotNonnegative(PinlabError, ValueError):
    """Circulant embedding has eigenvalues below the clipping tolerance."""


class LengthMismatch(PinlabError, ValueError):
    pass


class SizeMismatch(PinlabError, ValueError):
    pass


class NumericalLeak(PinlabError, ArithmeticError):
    """Backward-sampling step probabilities do not sum to one."""


class TooLarge(PinlabError, ValueError):
    pass


class StencilOutOfRange(PinlabError, ValueError):
    pass


class NotBracketed(PinlabError, ValueError):
    pass


class DegenerateVariance(PinlabError, ValueError):
    pass


class NotInvertible(PinlabError, ValueError):
    pass


class ConfigError(PinlabError, ValueError):
    pass


class ValidationError(PinlabError, ValueError):
    """Module-level precondition failure, tagged with the config field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
