"""Exception types shared across the package."""


class InklineError(Exception):
    """Base class for all package errors."""


class EmptyTrajectory(InklineError):
    """A trajectory (glyph, stroke, or line) has no points or no ink."""


class InvalidValue(InklineError):
    """A scalar argument is outside its valid domain (NaN, negative, ...)."""


class DegenerateExtent(InklineError):
    """A glyph has zero vertical extent and cannot be height-normalized."""


class ShapeMismatch(InklineError):
    """Array or sequence shapes are inconsistent with the operation."""


class MissingGradient(InklineError):
    """An optimizer step was requested on a parameter without a gradient."""


class UnknownCategory(InklineError):
    """A category id is outside the model's embedding table."""


class EmptyDataset(InklineError):
    """An operation requiring data received an empty dataset."""


class SequenceTooShort(InklineError):
    """A feature sequence is too short to cut two disjoint segments."""


class NeedTwoWriters(InklineError):
    """Contrastive losses need at least two distinct writers."""


class NeedTwoBoxes(InklineError):
    """Adjacent-pair layout features need at least two boxes."""


class NeedTwoClasses(InklineError):
    """Classifier training needs at least two classes."""


class EmptyReference(InklineError):
    """Recognition metrics were given an empty reference transcript."""


class InvalidSchedule(InklineError):
    """Noise schedule endpoints are outside (0, 1)."""


class InvalidTimestep(InklineError):
    """A diffusion timestep lies outside [1, T]."""


class ParseError(InklineError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class ConfigMismatch(InklineError):
    """A checkpoint was produced under a different model configuration."""


class IoError(InklineError):
    """A file could not be read or written."""
