"""Controllable face anonymization toolkit.

Disentangles face identity from image content with an encoder/decoder
generator, places identity codes on a unit hypersphere, and anonymizes by
re-sampling the identity vector at a chosen angle from the original while
keeping the content code untouched.
"""

from faceveil.errors import (
    AdapterUnavailable,
    AmbiguousPath,
    AnonymityViolation,
    ConfigError,
    DegenerateVector,
    EmptySweep,
    FaceveilError,
    FatalDivergence,
    IncompatibleCheckpoint,
    ModelNotLoaded,
    NoFace,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterUnavailable",
    "AmbiguousPath",
    "AnonymityViolation",
    "ConfigError",
    "DegenerateVector",
    "EmptySweep",
    "FaceveilError",
    "FatalDivergence",
    "IncompatibleCheckpoint",
    "ModelNotLoaded",
    "NoFace",
    "ShapeError",
    "__version__",
]
