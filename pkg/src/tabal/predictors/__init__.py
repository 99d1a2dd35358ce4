"""Probabilistic predictors behind a single prediction contract.

Every predictor maps (labeled context, query rows, class count) to a row-wise
probability matrix in the dataset's canonical class order; nothing is learned
between calls, so the labeled context is the only state.
"""

from .base import (
    PROBABILITY_ATOL,
    PredictorError,
    PredictorHandle,
    make_predictor,
    predict_proba,
    validate_probability_matrix,
)
from .external import ExternalPredictor, ProtocolError
from .linear import LinearModel, LinearPredictor, fit_linear, linear_predict_proba, loss_and_grad
from .neighbor import NeighborPredictor, neighbor_predict

__all__ = [
    "PROBABILITY_ATOL",
    "PredictorError",
    "PredictorHandle",
    "make_predictor",
    "predict_proba",
    "validate_probability_matrix",
    "ExternalPredictor",
    "ProtocolError",
    "LinearModel",
    "LinearPredictor",
    "fit_linear",
    "linear_predict_proba",
    "loss_and_grad",
    "NeighborPredictor",
    "neighbor_predict",
]
