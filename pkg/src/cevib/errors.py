"""Exception types shared across the package."""


class CevibError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(CevibError, ValueError):
    """Array dimensions do not chain or do not match a declared contract."""


class NotInitializedError(CevibError, RuntimeError):
    """Model parameters have not been built yet."""


class NotFittedError(CevibError, RuntimeError):
    """Operation requires a fitted model."""


class TrainingError(CevibError, RuntimeError):
    """Optimization produced a non-finite quantity or otherwise diverged."""


class PositivityError(CevibError, ValueError):
    """A treatment arm required by the operation is empty."""


class SplitError(CevibError, ValueError):
    """A requested partition is empty or unusable for training."""


class DataFormatError(CevibError, ValueError):
    """A data file does not match its documented layout."""


class JoinError(DataFormatError):
    """Rows of linked benchmark files could not be matched by id."""


class GenerationError(CevibError, RuntimeError):
    """Synthetic data generation produced an unusable covariance."""


class MetricError(CevibError, ValueError):
    """A metric is undefined for the given inputs."""


class ConfigError(CevibError, ValueError):
    """An experiment configuration is invalid or incomplete."""


class ExperimentError(CevibError, RuntimeError):
    """Too many replications failed to produce a trustworthy aggregate."""
