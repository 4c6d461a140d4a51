"""Exception hierarchy.

Every error raised on bad input derives from ``LiteRouteError`` (itself a
``ValueError``), so callers can catch the whole family at once.
"""


class LiteRouteError(ValueError):
    pass


# taxonomy / distributions
class OverlapError(LiteRouteError):
    pass


class CoverageError(LiteRouteError):
    pass


class EmptyMalignant(LiteRouteError):
    pass


class NegativeProbability(LiteRouteError):
    pass


class NormalizationError(LiteRouteError):
    pass


class LengthMismatch(LiteRouteError):
    pass


# ingest
class SchemaError(LiteRouteError):
    pass


class RowCountMismatch(LiteRouteError):
    pass


class UnknownLabel(LiteRouteError):
    pass


class DuplicateSampleId(LiteRouteError):
    pass


class TooFewSamples(LiteRouteError):
    pass


class InvalidSpec(LiteRouteError):
    pass


# risk
class NoAgeData(LiteRouteError):
    pass


class NoMalignantCases(LiteRouteError):
    pass


# fusion
class DegenerateTrainingSet(LiteRouteError):
    pass


class DimensionMismatch(LiteRouteError):
    pass


# energy
class EmptyDecisions(LiteRouteError):
    pass


class ZeroHeavyEnergy(LiteRouteError):
    pass


# metrics
class OutOfRangeLabel(LiteRouteError):
    pass


class NoMalignantSamples(LiteRouteError):
    pass


class NoEvaluableSubgroup(LiteRouteError):
    pass


class SubgroupMismatch(LiteRouteError):
    pass


class EmptyInput(LiteRouteError):
    pass


class ConfigError(LiteRouteError):
    """Malformed run/sweep configuration."""
