"""Full-batch training loop with Adam/SGD and early stopping.

Targets are standardized on the training rows before optimization and the
inverse transform is baked into ``predict``; callers always see spreads in
original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model as M


class TrainError(Exception):
    pass


@dataclass
class TrainConfig:
    hidden: int = 64
    n_layers: int = 2
    num_bases: int = 4
    lr: float = 1e-3
    dropout: float = 0.0
    optimizer: str = "adam"  # or "sgd"
    activation: str = "elu"
    epochs: int = 300
    patience: int = 50

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise TrainError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in M.ACTIVATIONS:
            raise TrainError(f"unknown activation {self.activation!r}")
        if not 1 <= self.n_layers <= 5:
            raise TrainError("n_layers must be in 1..5")
        if not 0.0 <= self.dropout < 1.0:
            raise TrainError("dropout must be in [0, 1)")
        if self.lr <= 0:
            raise TrainError("lr must be positive")

    def to_dict(self) -> dict:
        return {
            "hidden": self.hidden,
            "n_layers": self.n_layers,
            "num_bases": self.num_bases,
            "lr": self.lr,
            "dropout": self.dropout,
            "optimizer": self.optimizer,
            "activation": self.activation,
            "epochs": self.epochs,
            "patience": self.patience,
        }


@dataclass
class TrainResult:
    params: dict
    config: TrainConfig
    target_mean: float
    target_std: float
    best_epoch: int
    history: list[tuple[int, float, float | None]]  # (epoch, train mse, val mse)
    n_parameters: int = 0
    extras: dict = field(default_factory=dict)


class _Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, vec: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad
        mhat = self.m / (1.0 - self.b1**self.t)
        vhat = self.v / (1.0 - self.b2**self.t)
        return vec - self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _SGD:
    def __init__(self, size: int, lr: float):
        self.lr = lr

    def step(self, vec: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return vec - self.lr * grad


def train(
    mg: M.ModelGraph,
    x: np.ndarray,
    y: dict[int, float] | np.ndarray,
    train_idx: np.ndarray,
    val_idx: np.ndarray | None,
    config: TrainConfig,
    seed: int = 0,
) -> TrainResult:
    """Fit the model; deterministic for a fixed (inputs, config, seed)."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if len(train_idx) == 0:
        raise TrainError("empty training set")
    if isinstance(y, dict):
        full = np.zeros(mg.n_nodes)
        for node, val in y.items():
            full[node] = val
        y = full
    y = np.asarray(y, dtype=float)

    mu = float(y[train_idx].mean())
    sd = float(y[train_idx].std())
    if sd <= 0:
        sd = 1.0
    yz = (y - mu) / sd

    ss = np.random.SeedSequence(seed)
    init_ss, drop_ss = ss.spawn(2)
    rng_init = np.random.default_rng(init_ss)
    rng_drop = np.random.default_rng(drop_ss)
    params = M.init_params(
        mg, x.shape[1], config.hidden, config.n_layers, config.num_bases, rng_init
    )
    vec = M.flatten_params(params)
    opt = (_Adam if config.optimizer == "adam" else _SGD)(vec.size, config.lr)

    best_val = np.inf
    best_vec = vec.copy()
    best_epoch = 0
    stall = 0
    history: list[tuple[int, float, float | None]] = []
    have_val = val_idx is not None and len(val_idx) > 0
    if have_val:
        val_idx = np.asarray(val_idx, dtype=np.int64)

    for epoch in range(1, config.epochs + 1):
        params = M.unflatten_params(vec, params)
        scores, cache = M.forward(
            params,
            mg,
            x,
            activation=config.activation,
            dropout=config.dropout,
            train=True,
            rng=rng_drop,
            want_cache=True,
        )
        loss, dscores = M.mse_loss(scores, yz[train_idx], train_idx)
        grads, _ = M.backward(params, mg, cache, dscores)
        vec = opt.step(vec, M.flatten_params(grads))

        val_loss = None
        if have_val:
            eval_scores = M.forward(
                M.unflatten_params(vec, params), mg, x, activation=config.activation
            )
            val_loss = float(np.mean((eval_scores[val_idx] - yz[val_idx]) ** 2))
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_vec = vec.copy()
                best_epoch = epoch
                stall = 0
            else:
                stall += 1
        else:
            best_vec = vec.copy()
            best_epoch = epoch
        history.append((epoch, loss, val_loss))
        if have_val and stall >= config.patience:
            break

    params = M.unflatten_params(best_vec, params)
    return TrainResult(
        params=params,
        config=config,
        target_mean=mu,
        target_std=sd,
        best_epoch=best_epoch,
        history=history,
        n_parameters=vec.size,
    )


def predict(result: TrainResult, mg: M.ModelGraph, x: np.ndarray) -> np.ndarray:
    """Per-node spread predictions in original target units."""
    scores = M.forward(result.params, mg, x, activation=result.config.activation)
    return scores * result.target_std + result.target_mean


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise TrainError("shape mismatch in r2_score")
    if len(y_true) < 2:
        raise TrainError("r2_score needs at least 2 observations")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot <= 0:
        raise TrainError("r2_score undefined for constant targets")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot
