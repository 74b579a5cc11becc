"""
Exception hierarchy shared by every tcfinger module.

All errors derive from TcError so the CLI can report any library failure
with a single handler and exit code 1.
"""

from typing import Any, Optional


class TcError(Exception):
    """Base class for all tcfinger errors."""


# timeseries
class RaggedSampling(TcError):
    pass


class UnknownChannel(TcError):
    pass


class EmptyDataset(TcError):
    pass


class MissingValue(TcError):
    pass


class IoError(TcError):
    pass


# lti / sysid
class DimError(TcError):
    pass


class LengthError(TcError):
    pass


class RiccatiDiverged(TcError):
    pass


class SingularCov(TcError):
    pass


class InsufficientData(TcError):
    pass


class RankDeficient(TcError):
    """Hankel matrix rank is below the requested model order."""

    def __init__(self, message: str, achievable_rank: int):
        super().__init__(message)
        self.achievable_rank = achievable_rank


# plantsim / cli
class ConfigError(TcError):
    pass


class SchemaError(TcError):
    pass


# fingerprint
class DegenerateRange(TcError):
    pass


class EmptySeries(TcError):
    pass


class ZeroVariance(TcError):
    """
    Chunk has zero standard deviation.

    Attributes:
        partial: FeatureVector with skewness/kurtosis set to 0 and the degenerate flag on
    """

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


# classify
class DegenerateLabels(TcError):
    pass


class BadInput(TcError):
    pass


class StratifyError(TcError):
    pass


# watermark
class InvalidMode(TcError):
    pass


class UnsafeDelay(TcError):
    pass


class NotApplicable(TcError):
    pass
