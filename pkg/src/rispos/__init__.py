"""RIS-aided mmWave positioning: channel synthesis, estimation, bounds, fusion.

Module map (spec-facing aliases in parentheses): geometry (scene),
channel, bounds (crb), estimation (estimator), fusion, phasedesign
(risdesign), config + harness + cli.
"""

from . import bounds, channel, config, estimation, fusion, geometry, harness, phasedesign
from . import bounds as crb
from . import estimation as estimator
from . import geometry as scene
from . import phasedesign as risdesign
from .errors import (AmbiguousDelay, ConfigError, ConstraintError,
                     DegenerateGeometry, FusionImpossible, GainIllConditioned,
                     InvalidCosines, MatchingAmbiguous, ParseError, PeakDeficit,
                     RisposError, ShapeError, UnboundedCovariance,
                     UnidentifiableError)

__version__ = "0.1.0"

__all__ = [
    "bounds", "channel", "config", "estimation", "fusion", "geometry",
    "harness", "phasedesign", "crb", "estimator", "scene", "risdesign",
    "AmbiguousDelay", "ConfigError", "ConstraintError", "DegenerateGeometry",
    "FusionImpossible", "GainIllConditioned", "InvalidCosines",
    "MatchingAmbiguous", "ParseError", "PeakDeficit", "RisposError",
    "ShapeError", "UnboundedCovariance", "UnidentifiableError", "__version__",
]
