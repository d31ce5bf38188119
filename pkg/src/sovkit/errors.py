"""Exception hierarchy shared by all sovkit modules."""


class SovkitError(Exception):
    """Base class for every error raised by sovkit."""


class ParameterError(SovkitError, ValueError):
    """Invalid model parameters (genericity, twist simplicity, shapes)."""


class DomainError(SovkitError, ValueError):
    """A spectral parameter outside the domain of an operation."""


class InterpolationError(SovkitError):
    """Interpolation nodes collide, so the reconstruction is ill-posed."""


class IllConditionedError(SovkitError):
    """A linear system is numerically rank deficient."""

    def __init__(self, message, condition_estimate):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class ConvergenceError(SovkitError):
    """Newton refinement failed; ``result`` carries the last iterate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class BasisError(SovkitError):
    """The SoV covector family failed to be a basis."""


class ConsistencyError(SovkitError):
    """A structural identity of the model failed beyond tolerance."""


class QFunctionError(SovkitError):
    """No unique Q-function of the required form exists."""


class CompletenessError(SovkitError):
    """The enumerated spectrum does not match the expected count."""
