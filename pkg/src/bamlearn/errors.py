"""Exception types raised across the package."""


class BamError(Exception):
    """Base class for all package errors."""


class ConfigError(BamError, ValueError):
    """Invalid configuration value, size or combination of settings."""


class DataError(BamError, ValueError):
    """Malformed or non-finite input data."""


class NumericalError(BamError, ArithmeticError):
    """A computation hit a degenerate numerical case (zero norm, empty row)."""


class UsageError(BamError, ValueError):
    """An operation was called with arguments that violate its contract."""


class CheckpointError(BamError, IOError):
    """A checkpoint file is missing, corrupt or does not match the model."""


class TrainingDiverged(BamError, RuntimeError):
    """Loss or gradient became non-finite during training."""

    def __init__(self, step, last_log=None):
        self.step = step
        self.last_log = last_log
        msg = f"non-finite loss or gradient at step {step}"
        if last_log is not None:
            msg += f"; last log: {last_log}"
        super().__init__(msg)
