"""Exception hierarchy shared by every module in the package."""


class OptBiasError(Exception):
    """Base class for all errors raised by optbias."""


class InvalidProjector(OptBiasError, ValueError):
    pass


class DimensionError(OptBiasError, ValueError):
    pass


class RankDeficient(OptBiasError, ValueError):
    pass


class SpikeBelowNoiseFloor(OptBiasError, ValueError):
    """A sample spike does not exceed the bulk noise level."""


class ZeroTarget(OptBiasError, ValueError):
    pass


class TargetInSpikeSpan(OptBiasError, ValueError):
    """The target direction lies (numerically) inside the estimated spike space."""


class SingularTransform(OptBiasError, ValueError):
    pass


class DegenerateCorrection(OptBiasError, ValueError):
    pass


class NotPositiveDefinite(OptBiasError, ValueError):
    pass


class DegenerateObjective(OptBiasError, ValueError):
    pass


class ConfigError(OptBiasError, ValueError):
    pass
