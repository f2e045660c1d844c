"""Relational GCN spread-regression model, trainer and checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    ACTIVATIONS,
    ModelError,
    ModelGraph,
    backward,
    flatten_params,
    forward,
    init_params,
    mse_loss,
    n_parameters,
    unflatten_params,
    zeros_like_params,
)
from .train import TrainConfig, TrainError, TrainResult, predict, r2_score, train
