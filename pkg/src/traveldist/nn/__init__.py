"""Numpy neural network engine: layers, sequential networks, training."""
from .layers import Conv1D, Dense, Flatten, MaxPool1D, ReLU, ShapeError, cross_entropy, softmax
from .network import (ABLATION_ORDER, ArchitectureSpec, LayerSpec, Network, NumericError,
                      build_paper_architectures, cnn_spec, mlp_spec)
from .training import TrainedModel, TrainingConfig, TrainingError, gradient_check, train
