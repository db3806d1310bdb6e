"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class AnisoframeError(Exception):
    """Base class for every error raised by the package."""


# dilation-core
class NotSquare(AnisoframeError, ValueError):
    pass


class NotExpansive(AnisoframeError, ValueError):
    pass


class NumericalFailure(AnisoframeError, ArithmeticError):
    pass


class InvalidMargin(AnisoframeError, ValueError):
    pass


class SingularInverse(AnisoframeError, ArithmeticError):
    pass


# frequency-cover / partition-weights
class OriginNotExcluded(AnisoframeError, ValueError):
    pass


class CellOutOfBox(AnisoframeError, ValueError):
    pass


class LowCellMissesOrigin(AnisoframeError, ValueError):
    pass


class CoverNotCovering(AnisoframeError, ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class IndexOutOfRange(AnisoframeError, IndexError):
    pass


class NegativeIndexForInhomogeneous(AnisoframeError, ValueError):
    pass


# spectral-signals
class SizeMismatch(AnisoframeError, ValueError):
    pass


class InvalidExponent(AnisoframeError, ValueError):
    pass


class BandMismatch(AnisoframeError, ValueError):
    pass


# wavelet-system
class PrototypeKindMismatch(AnisoframeError, ValueError):
    pass


class DeltaNonPositive(AnisoframeError, ValueError):
    pass


# certifier
class ExponentOutOfRange(AnisoframeError, ValueError):
    pass


class QuadratureUnderResolved(AnisoframeError, ArithmeticError):
    pass


class ThresholdViolated(AnisoframeError, ValueError):
    pass


class Inconclusive(AnisoframeError, RuntimeError):
    pass


class NonPositiveConstant(AnisoframeError, ValueError):
    pass


# cli
class ConfigInvalid(AnisoframeError, ValueError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class InputUnreadable(AnisoframeError, OSError):
    pass
