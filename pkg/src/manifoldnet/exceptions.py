"""Exception types shared across the package."""


class ManifoldNetError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(ManifoldNetError):
    pass


class RankDeficient(ManifoldNetError):
    pass


class NoConvergence(ManifoldNetError):
    pass


class NotOrthonormal(ManifoldNetError):
    pass


class TangencyViolated(ManifoldNetError):
    pass


class AntipodalPoint(ManifoldNetError):
    pass


class CutLocus(ManifoldNetError):
    pass


class ShapeMismatch(ManifoldNetError):
    pass


class NonFiniteLoss(ManifoldNetError):
    pass


class StaleCache(ManifoldNetError):
    pass


class BadMagic(ManifoldNetError):
    pass


class TruncatedFile(ManifoldNetError):
    pass


class CountMismatch(ManifoldNetError):
    pass


class LabelOutOfRange(ManifoldNetError):
    pass


class InvalidConfig(ManifoldNetError):
    pass


class DatasetUnavailable(ManifoldNetError):
    pass
