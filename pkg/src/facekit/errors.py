"""Exception and warning types raised across facekit."""


class FacekitError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(FacekitError, ValueError):
    pass


class NonSquare(FacekitError, ValueError):
    pass


class Asymmetric(FacekitError, ValueError):
    pass


class NonFinite(FacekitError, ValueError):
    pass


class NoConvergence(FacekitError, RuntimeError):
    pass


class SingularAfterRidge(FacekitError, ArithmeticError):
    pass


class ZeroMatrix(FacekitError, ValueError):
    pass


# dataset
class MalformedHeader(FacekitError, ValueError):
    pass


class UnsupportedMaxval(FacekitError, ValueError):
    pass


class TruncatedData(FacekitError, ValueError):
    pass


class InsufficientSamples(FacekitError, ValueError):
    def __init__(self, label, available, needed):
        super().__init__(
            f"class {label!r} has {available} images, split needs {needed}")
        self.label = label


class EmptySubset(FacekitError, ValueError):
    pass


# subspace
class DegenerateData(FacekitError, ValueError):
    pass


class IndexOutOfRange(FacekitError, IndexError):
    pass


class DuplicateIndex(FacekitError, ValueError):
    pass


class UnsupportedScheme(FacekitError, ValueError):
    pass


# classify / ensemble
class EmptyGallery(FacekitError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class NoVotes(FacekitError, ValueError):
    pass


class AllZeroWeights(FacekitError, ValueError):
    pass


class LengthMismatch(FacekitError, ValueError):
    pass


class TooFewItems(FacekitError, ValueError):
    pass


class DTooLarge(FacekitError, ValueError):
    pass


class TDenominatorZero(FacekitError, ValueError):
    pass


class CountOutOfRange(FacekitError, ValueError):
    pass


class ConfigError(FacekitError, ValueError):
    pass


class ConstantImageWarning(UserWarning):
    """Histogram equalization was asked to spread a single intensity."""


class DegenerateARIWarning(UserWarning):
    """The adjusted Rand index denominator vanished."""
