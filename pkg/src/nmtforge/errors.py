"""Exception hierarchy shared across the toolkit.

Every error carries a short machine-readable ``code`` and the pipeline
``stage`` it belongs to; the CLI maps stages to distinct exit codes.
"""


class ForgeError(Exception):
    """Base class for all toolkit errors."""

    stage = "general"
    code = "error"
    exit_code = 1

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConfigError(ForgeError):
    stage = "config"
    code = "invalid_config"
    exit_code = 2


class CorpusError(ForgeError):
    stage = "corpus"
    exit_code = 3


class AlignmentError(CorpusError):
    code = "line_count_mismatch"


class EncodingError(CorpusError):
    code = "bad_encoding"


class SplitSizeError(CorpusError):
    code = "empty_split"


class SubwordError(ForgeError):
    stage = "subword"
    exit_code = 4


class DecodeError(SubwordError):
    code = "bad_token_id"


class ModelError(ForgeError):
    stage = "model"
    exit_code = 5


class ShapeError(ModelError):
    code = "shape_mismatch"


class StateError(ModelError):
    code = "bad_state"


class TrainingError(ForgeError):
    stage = "train"
    exit_code = 6


class DivergenceError(TrainingError):
    code = "non_finite_loss"


class IntegrityError(TrainingError):
    code = "corrupt_checkpoint"


class InferenceError(ForgeError):
    stage = "translate"
    exit_code = 7


class EnsembleError(InferenceError):
    code = "vocab_mismatch"


class MetricsError(ForgeError):
    stage = "evaluate"
    exit_code = 8


class ServiceError(ForgeError):
    stage = "serve"
    exit_code = 9
