"""Alignment-free CTC pronunciation features, ordinal scoring and
speaker pseudo-labeling."""

from .ctc import (
    EmissionMatrix,
    Vocab,
    brute_force_log_likelihood,
    ctc_backward_trellis,
    ctc_forward_trellis,
    ctc_log_likelihood,
    logsumexp,
)
from .errors import (
    CompatibilityError,
    FormatError,
    GopCtcError,
    InputError,
    NumericError,
    SizeError,
    VocabularyError,
)
from .gop import GopFeatureSet, assemble_features, compute_lpp, compute_lpr_del, compute_lpr_sub
from .metrics import MetricsReport, confusion_matrix, evaluate
from .ordinal import OrdinalLossConfig, balanced_class_weights, loss_grad_logits, loss_value
from .scorer import (
    Prediction,
    ScorerModel,
    TrainConfig,
    interpolate,
    optimize_interpolation,
    pool_utterance,
    predict,
    train,
)

__version__ = "0.1.0"
