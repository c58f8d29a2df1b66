"""Exception hierarchy shared across the pipeline.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class OfflangError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(OfflangError):
    """Invalid configuration, flags, or missing input paths."""


class DataError(OfflangError):
    """Malformed or inconsistent input data."""


class NumericError(OfflangError):
    """Numerical failure during optimization or inference."""


# corpus
class MalformedRow(DataError):
    pass


class UnknownLabel(DataError):
    pass


class EmptyClass(DataError):
    pass


# feature store
class BadMagic(DataError):
    pass


class TruncatedFile(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class DuplicateId(DataError):
    pass


class EmptyIntersection(DataError):
    pass


# neural / ensemble
class DimensionMismatch(DataError):
    pass


class NonFiniteLoss(NumericError):
    pass


class IdMismatch(DataError):
    pass


class MemberOrderMismatch(DataError):
    pass


# baseline
class EmptyVocabulary(DataError):
    pass
