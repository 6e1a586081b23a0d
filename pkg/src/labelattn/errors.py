"""Exception types shared across the package."""


class LabelAttnError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(LabelAttnError, ValueError):
    """Operands have incompatible or unsupported shapes."""


class ConfigError(LabelAttnError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class DataError(LabelAttnError, ValueError):
    """Malformed input data; message names the offending row or sequence."""


class DegenerateLabelError(LabelAttnError, ValueError):
    """AUC requested for a label whose targets are all-positive or all-negative."""


class TrainingDivergedError(LabelAttnError, RuntimeError):
    """Loss became non-finite during training."""


class CheckpointError(LabelAttnError, ValueError):
    """Checkpoint file is malformed or does not match the model."""
