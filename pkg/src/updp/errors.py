"""Exception hierarchy shared by every module."""


class UpdpError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVector(UpdpError, ValueError):
    pass


class NonFiniteLoss(UpdpError, ArithmeticError):
    pass


class NonFiniteGradient(UpdpError, ArithmeticError):
    pass


class InvalidDim(UpdpError, ValueError):
    pass


class DimMismatch(UpdpError, ValueError):
    pass


class InvalidConfig(UpdpError, ValueError):
    pass


class InvalidTemperature(UpdpError, ValueError):
    pass


class TooFewInstances(UpdpError, ValueError):
    pass


class NotEnoughViews(UpdpError, ValueError):
    pass


class InvalidPolicy(UpdpError, ValueError):
    pass


class BatchTooSmall(UpdpError, ValueError):
    pass


class BudgetExceedsDataset(UpdpError, ValueError):
    pass


class NotEnoughNeighbors(UpdpError, ValueError):
    pass


class SingleClass(UpdpError, ValueError):
    pass


class EmptySelection(UpdpError, ValueError):
    pass


class BadMagic(UpdpError, ValueError):
    pass


class TruncatedFile(UpdpError, ValueError):
    pass


class NonFiniteFeature(UpdpError, ValueError):
    pass


class LabelOutOfRange(UpdpError, ValueError):
    pass


class VersionMismatch(UpdpError, ValueError):
    pass


class IoError(UpdpError, OSError):
    pass
