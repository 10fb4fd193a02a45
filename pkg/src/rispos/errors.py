"""Exception types shared across the toolkit."""


class RisposError(Exception):
    """Base class for all toolkit errors."""


class DegenerateGeometry(RisposError):
    """Coincident points or a UE on the azimuth branch cut."""


class AmbiguousDelay(RisposError):
    """Delay outside the unambiguous range [0, K/W]."""


class ShapeError(RisposError):
    """Matrix dimensions inconsistent with the configured arrays."""


class ConfigError(RisposError):
    """Invalid radio / array configuration."""


class ConstraintError(ConfigError):
    """A model constraint (e.g. T >= N) is violated; message names it."""


class ParseError(ConfigError):
    """Malformed experiment configuration file."""


class UnidentifiableError(RisposError):
    """Fisher information singular: geometry gives no unique solution."""


class PeakDeficit(RisposError):
    """Fewer spectrum peaks than paths.

    Carries the peaks that were found in ``found``.
    """

    def __init__(self, message, found=()):
        super().__init__(message)
        self.found = list(found)


class MatchingAmbiguous(RisposError):
    """Path energies too close to assign estimates to paths."""


class GainIllConditioned(RisposError):
    """Gain regressors nearly collinear."""


class InvalidCosines(RisposError):
    """Estimated direction cosines leave the unit disc beyond tolerance."""


class FusionImpossible(RisposError):
    """No anchor with a usable covariance."""


class UnboundedCovariance(RisposError):
    """Per-path Fisher information singular; the path carries no position fix."""
