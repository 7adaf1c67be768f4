"""Losses, gradient-based optimizers, the halving LR schedule, training loop.

Losses: MAE (subgradient sign(pred-y)/N, 0 at ties) and MSE (gradient
2(pred-y)/N). Optimizers: SGD with momentum, RMSProp (rho=0.9, eps=1e-8),
Adam (0.9/0.999/1e-8, bias-corrected). The learning rate is piecewise
constant, halved every ``lr_halving_period`` epochs.

A training run owns its network, optimizer state, and RNG streams; for a
fixed config/seed on one thread the produced history is bit-reproducible.
Epoch shuffling is an explicit Fisher-Yates pass on a per-epoch stream
derived from (seed, epoch), and the last partial batch is kept.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .network import Gradients, Network, backward, forward
from .rng import fisher_yates, stream

LOSS_KINDS = ("mae", "mse")
OPTIMIZER_KINDS = ("sgd", "rmsprop", "adam")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch_index: int, detail: str):
        self.epoch = epoch
        self.batch_index = batch_index
        super().__init__(f"training diverged at epoch {epoch}, batch {batch_index}: {detail}")


def loss_value_and_grad(kind: str, y_true, y_pred) -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to the predictions."""
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss {kind!r}; choose from {LOSS_KINDS}")
    y_pred = np.asarray(y_pred, dtype=np.float64)
    yt = np.asarray(y_true, dtype=np.float64).ravel()
    yp = y_pred.ravel()
    if yt.size == 0:
        raise ValueError("empty target vector")
    if yt.size != yp.size:
        raise ValueError(f"length mismatch: {yt.size} targets vs {yp.size} predictions")
    r = yp - yt
    n = yt.size
    with np.errstate(over="ignore"):  # diverging runs hit inf; the caller aborts on it
        if kind == "mae":
            value = float(np.mean(np.abs(r)))
            grad = np.sign(r) / n
        else:
            value = float(np.mean(r * r))
            grad = 2.0 * r / n
    return value, grad.reshape(y_pred.shape)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    base_lr: float
    lr_halving_period: int = 100
    loss: str = "mae"
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if self.lr_halving_period < 1:
            raise ValueError(f"lr_halving_period must be >= 1, got {self.lr_halving_period}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}")


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """base_lr halved once per full halving period elapsed."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    return config.base_lr * 2.0 ** (-(epoch // config.lr_halving_period))


@dataclass
class OptimizerState:
    """Optimizer kind, hyperparameters, and per-parameter accumulators.

    Accumulators are allocated on the first step and must shape-match the
    network on every later step.
    """

    kind: str
    learning_rate: float
    momentum: float = 0.0  # sgd
    decay: float = 0.9  # rmsprop
    beta1: float = 0.9  # adam
    beta2: float = 0.999
    epsilon: float = 1e-8
    slots: list[dict[str, dict[str, np.ndarray]]] | None = None
    step_count: int = 0

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; choose from {OPTIMIZER_KINDS}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def make_optimizer(kind: str, learning_rate: float, momentum: float = 0.9) -> OptimizerState:
    return OptimizerState(kind=kind, learning_rate=learning_rate, momentum=momentum)


def _init_slots(state: OptimizerState, net: Network) -> None:
    per_kind = {"sgd": ("v",), "rmsprop": ("s",), "adam": ("m", "v")}[state.kind]
    state.slots = [
        {name: {slot: np.zeros_like(p) for slot in per_kind} for name, p in ly.params().items()}
        for ly in net.layers
    ]


def optimizer_step(state: OptimizerState, net: Network, grads: Gradients, lr: float):
    """Apply one update in place; returns (net, state) for chaining."""
    if state.slots is None:
        _init_slots(state, net)
    if len(grads.layers) != len(net.layers):
        raise ValueError("gradient layout does not match the network")
    state.step_count += 1
    t = state.step_count
    for li, ly in enumerate(net.layers):
        for name, p in ly.params().items():
            g = grads.layers[li][name]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            slot = state.slots[li][name]
            if slot[next(iter(slot))].shape != p.shape:
                raise ValueError("optimizer accumulators do not shape-match the network")
            if state.kind == "sgd":
                v = slot["v"]
                v *= state.momentum
                v -= lr * g
                p += v
            elif state.kind == "rmsprop":
                s = slot["s"]
                s *= state.decay
                s += (1.0 - state.decay) * g * g
                p -= lr * g / (np.sqrt(s) + state.epsilon)
            else:  # adam
                m, v = slot["m"], slot["v"]
                m *= state.beta1
                m += (1.0 - state.beta1) * g
                v *= state.beta2
                v += (1.0 - state.beta2) * g * g
                m_hat = m / (1.0 - state.beta1**t)
                v_hat = v / (1.0 - state.beta2**t)
                p -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    net.mutation_count += 1
    return net, state


@dataclass
class TrainHistory:
    epoch: list[int] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epoch)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "lr", "train_loss", "test_loss", "seconds"])
            for row in zip(self.epoch, self.lr, self.train_loss, self.test_loss, self.seconds):
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def train(net: Network, train_data, test_data, config: TrainConfig, optimizer: OptimizerState):
    """Mini-batch training loop; returns (net, TrainHistory).

    ``train_data``/``test_data`` need ``.x`` (N x d) and ``.y`` (N,) — see
    tasks.Dataset. Aborts with TrainingDivergedError on non-finite loss or
    parameters, recording where.
    """
    x_tr = np.asarray(train_data.x, dtype=np.float64)
    y_tr = np.asarray(train_data.y, dtype=np.float64).ravel()
    x_te = np.asarray(test_data.x, dtype=np.float64)
    y_te = np.asarray(test_data.y, dtype=np.float64).ravel()
    if x_tr.shape[1] != net.in_dim:
        raise ValueError(f"train data has {x_tr.shape[1]} features, network expects {net.in_dim}")
    if net.out_dim != 1:
        raise ValueError("training targets are scalar; network must have out_dim 1")

    n = x_tr.shape[0]
    history = TrainHistory()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        lr = lr_at_epoch(config, epoch)
        if config.shuffle:
            order = fisher_yates(n, stream(config.seed, "shuffle", epoch))
        else:
            order = np.arange(n)
        drop_rng = stream(config.seed, "dropout", epoch)
        loss_sum = 0.0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            pred, cache = forward(net, x_tr[idx], training=True, rng=drop_rng)
            value, grad = loss_value_and_grad(config.loss, y_tr[idx], pred)
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch, bi, f"{config.loss} loss is {value}")
            grads = backward(net, cache, grad)
            optimizer_step(optimizer, net, grads, lr)
            loss_sum += value * idx.size
        if not net.all_finite():
            raise TrainingDivergedError(epoch, -1, "non-finite parameter after update")
        test_pred, _ = forward(net, x_te, training=False)
        test_value, _ = loss_value_and_grad(config.loss, y_te, test_pred)
        history.epoch.append(epoch)
        history.lr.append(lr)
        history.train_loss.append(loss_sum / n)
        history.test_loss.append(test_value)
        history.seconds.append(time.perf_counter() - t0)
    return net, history
