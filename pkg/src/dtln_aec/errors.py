"""Exception hierarchy shared by all modules."""


class AecError(Exception):
    """Base class for every error raised by this package."""


class DataError(AecError, ValueError):
    """Input data (audio, weights, assets) is invalid."""


class UnsupportedFormat(DataError):
    pass


class CorruptFile(DataError):
    pass


class IoFailure(AecError, OSError):
    pass


class BadMagic(DataError):
    pass


class VersionMismatch(DataError):
    pass


class MissingTensor(DataError):
    pass


class UnexpectedTensor(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class TrailingBytes(DataError):
    pass


class InvalidUnits(DataError):
    pass


class InvalidCutoffs(DataError):
    pass


class ZeroDirectPath(DataError):
    pass


class AllZeroIr(DataError):
    pass


class EmptyAssetPool(DataError):
    pass


class ZeroTarget(DataError):
    pass


class EmptyMask(DataError):
    pass
