"""Exception types shared across the package."""


class ReviewRankError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(ReviewRankError, ValueError):
    """Operands have incompatible shapes; message names both."""


class DegenerateInputError(ReviewRankError, ValueError):
    """Input is outside an operation's domain (empty, near-zero norm, ...)."""


class MaskParameterError(ReviewRankError, ValueError):
    """Mask weights violate the required 1 >= alpha > beta > 0 ordering."""


class CorpusFormatError(ReviewRankError, ValueError):
    """A corpus file failed schema validation."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class ReferentialError(ReviewRankError, ValueError):
    """A record references an id that does not resolve."""


class AnnotationSpanError(ReviewRankError, ValueError):
    """An annotation span points outside its review's token range."""


class ConfigError(ReviewRankError, ValueError):
    """Invalid or inconsistent configuration values."""


class CheckpointError(ReviewRankError, ValueError):
    """Checkpoint file is corrupt or incompatible with the config."""


class GradCheckError(ReviewRankError, RuntimeError):
    """Finite-difference verification could not be carried out."""


class DivergenceError(ReviewRankError, RuntimeError):
    """Training produced a non-finite loss."""
