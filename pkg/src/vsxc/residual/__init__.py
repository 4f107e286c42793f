"""Residual model: K-means over sliding windows with one LSTM per cluster."""
from .clusterlstm import (ClusterLstmModel, ClusterSizeError, ResidualConfig, ResidualGateError,
                          WindowSet, clusterlstm_one_step, clusterlstm_predict, clusterlstm_train,
                          fit_residual, lstm_predict, make_windows)
from .kmeans import KMeansModel, kmeans_fit, nearest_centroid
from .lstm import LstmWeights, init_weights, lstm_forward, train_lstm, zero_weights

__all__ = [
    "ClusterLstmModel", "ClusterSizeError", "ResidualConfig", "ResidualGateError", "WindowSet",
    "clusterlstm_one_step", "clusterlstm_predict", "clusterlstm_train", "fit_residual",
    "lstm_predict", "make_windows", "KMeansModel", "kmeans_fit", "nearest_centroid",
    "LstmWeights", "init_weights", "lstm_forward", "train_lstm", "zero_weights",
]
