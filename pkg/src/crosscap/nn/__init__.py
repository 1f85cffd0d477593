"""Dense numeric core: kernels, model families, optimizers, grad checking."""

from .functional import PROB_FLOOR, cross_entropy, dropout_mask, softmax
from .gradcheck import GradCheckReport, grad_check
from .kernels import BACKEND
from .models import CaptionModel, DimensionError, SequenceClassifier, lstm_step
from .optim import Adam, Sgd
from .params import load_params, save_params

__all__ = [
    "PROB_FLOOR", "cross_entropy", "dropout_mask", "softmax",
    "GradCheckReport", "grad_check", "BACKEND",
    "CaptionModel", "DimensionError", "SequenceClassifier", "lstm_step",
    "Adam", "Sgd", "load_params", "save_params",
]
