"""Small numpy classifiers: LSTM and dense stacks, Adam, early stopping."""
from .gradcheck import grad_check
from .io import load_model, model_checksum, save_model
from .model import (PLAIN_DNN_HIDDEN, SWITCH_DNN_HIDDEN, NeuralModel, build_model,
                    cross_entropy, dense_arch, lstm_arch, softmax)
from .optim import Adam
from .train import TrainConfig, TrainLog, train

__all__ = [
    "Adam", "NeuralModel", "TrainConfig", "TrainLog", "build_model", "cross_entropy",
    "dense_arch", "grad_check", "load_model", "lstm_arch", "model_checksum", "save_model",
    "softmax", "train", "PLAIN_DNN_HIDDEN", "SWITCH_DNN_HIDDEN",
]
