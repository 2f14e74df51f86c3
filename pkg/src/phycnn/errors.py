"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: config problems exit 2, bad data exits 3,
numerical failures exit 4.
"""


class PhyCNNError(Exception):
    exit_code = 1


class ConfigError(PhyCNNError, ValueError):
    exit_code = 2


class DataError(PhyCNNError, ValueError):
    exit_code = 3


class DomainError(DataError):
    pass


class ShapeError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class PartitionError(DataError):
    pass


class MetricError(DataError):
    pass


class NumericError(PhyCNNError, RuntimeError):
    exit_code = 4


class SimulationError(NumericError):
    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class OptimizerError(NumericError):
    pass


class TrainingError(NumericError):
    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class FitError(NumericError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonIdentifiableError(FitError):
    pass
