"""Exception types shared across the package."""


class FaceveilError(Exception):
    """Base class for all package-specific errors."""

    code = "error"


class DegenerateVector(FaceveilError):
    """A vector with (near-)zero norm cannot be projected onto the sphere."""

    code = "degenerate_vector"


class AmbiguousPath(FaceveilError):
    """Antipodal endpoints admit infinitely many geodesics."""

    code = "ambiguous_path"


class AnonymityViolation(FaceveilError):
    """Requested angle does not exceed the verification threshold angle."""

    code = "anonymity_violation"


class EmptySweep(FaceveilError):
    """A sweep needs at least one angle and one direction seed."""

    code = "empty_sweep"


class ShapeError(FaceveilError):
    """Tensor shapes are inconsistent with each other or with the config."""

    code = "shape_error"


class ConfigError(FaceveilError):
    """A configuration value is out of range or unknown."""

    code = "config_error"


class AdapterUnavailable(FaceveilError):
    """A required external adapter (recognizer, detector, ...) is not loaded."""

    code = "adapter_unavailable"


class FatalDivergence(FaceveilError):
    """Training produced a non-finite loss; aborted with diagnostics."""

    code = "fatal_divergence"

    def __init__(self, message: str, step: int | None = None, report: dict | None = None):
        super().__init__(message)
        self.step = step
        self.report = report or {}


class IncompatibleCheckpoint(FaceveilError):
    """Checkpoint file is truncated, wrong version, or config-incompatible."""

    code = "incompatible_checkpoint"


class ModelNotLoaded(FaceveilError):
    """An operation that needs a trained checkpoint was called without one."""

    code = "model_not_loaded"


class NoFace(FaceveilError):
    """The alignment adapter found no face in the input."""

    code = "no_face"

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index
