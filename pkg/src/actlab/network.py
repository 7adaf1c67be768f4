"""Fully-connected feed-forward networks with exact reverse-mode gradients.

A network is an ordered list of dense layers. Within one layer the forward
order is: affine map, optional batch normalization, activation, optional
(inverted) dropout. The output layer carries the identity activation; the
identity is rejected anywhere else. Batch norm uses batch statistics while
training and exponential-moving-average running statistics at inference
(momentum 0.9, epsilon 1e-5). Dropout scales kept units by 1/(1-rate) at
train time so inference needs no rescaling.

Training mutates a network in place under a single owner; a trained network
used through :func:`predict_fn` is treated as frozen and is safe to share.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .activations import IDENTITY, ActivationSpec, resolve
from .rng import stream

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


class StaleCacheError(RuntimeError):
    """backward() received a cache from a forward pass on different parameters."""


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: ActivationSpec
    has_bias: bool = True
    batch_norm: bool = False
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


class Layer:
    """One dense layer: spec plus materialized parameters."""

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.w = np.zeros((spec.in_dim, spec.out_dim))
        self.b = np.zeros((1, spec.out_dim)) if spec.has_bias else None
        if spec.batch_norm:
            self.gamma = np.ones((1, spec.out_dim))
            self.beta = np.zeros((1, spec.out_dim))
            self.running_mean = np.zeros((1, spec.out_dim))
            self.running_var = np.ones((1, spec.out_dim))
        else:
            self.gamma = self.beta = self.running_mean = self.running_var = None

    def params(self) -> dict[str, np.ndarray]:
        out = {"w": self.w}
        if self.b is not None:
            out["b"] = self.b
        if self.gamma is not None:
            out["gamma"] = self.gamma
            out["beta"] = self.beta
        return out


class Network:
    def __init__(self, layers: list[Layer], seed: int):
        _validate_chain([ly.spec for ly in layers])
        self.layers = layers
        self.seed = seed
        self.mutation_count = 0  # bumped on every parameter update; guards stale caches

    @property
    def in_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].spec.out_dim

    @property
    def hidden_count(self) -> int:
        return len(self.layers) - 1

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for ly in self.layers for p in ly.params().values())


def _validate_chain(specs: list[LayerSpec]) -> None:
    if not specs:
        raise ValueError("a network needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
    for i, s in enumerate(specs[:-1]):
        if s.activation.name == "identity":
            raise ValueError(f"identity activation only permitted on the output layer (layer {i})")


def mlp_specs(dims: list[int], activation: ActivationSpec, first_layer_bias: bool = True) -> list[LayerSpec]:
    """Standard MLP layout: hidden layers share one activation, linear output."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    specs = []
    for i in range(len(dims) - 1):
        last = i == len(dims) - 2
        specs.append(
            LayerSpec(
                in_dim=dims[i],
                out_dim=dims[i + 1],
                activation=IDENTITY if last else activation,
                has_bias=True if i > 0 else first_layer_bias,
            )
        )
    return specs


def init_network(layer_specs: list[LayerSpec], seed: int) -> Network:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.

    Deterministic: layer i draws from the named stream (seed, "init", i).
    """
    layers = []
    for i, spec in enumerate(layer_specs):
        ly = Layer(spec)
        limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        ly.w = stream(seed, "init", i).uniform(-limit, limit, size=(spec.in_dim, spec.out_dim))
        layers.append(ly)
    return Network(layers, seed=seed)


@dataclass
class _LayerCache:
    x_in: np.ndarray
    z: np.ndarray
    pre_act: np.ndarray  # post batch-norm input to the activation (z when no BN)
    z_hat: np.ndarray | None = None
    batch_var: np.ndarray | None = None
    dropout_mask: np.ndarray | None = None


@dataclass
class ForwardCache:
    layers: list[_LayerCache] = field(default_factory=list)
    mutation_count: int = 0
    training: bool = False


def forward(net: Network, x, training: bool = False, rng: np.random.Generator | None = None):
    """Evaluate the network, returning (predictions, cache for backward).

    Dropout fires only when training=True and needs an explicit generator;
    batch norm uses batch statistics while training (and updates the running
    averages), running statistics otherwise.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D batch, got ndim={x.ndim}")
    if x.shape[1] != net.in_dim:
        raise ValueError(f"input has {x.shape[1]} features, network expects {net.in_dim}")
    if training and rng is None and any(ly.spec.dropout_rate > 0 for ly in net.layers):
        raise ValueError("training forward with dropout requires an rng")

    cache = ForwardCache(mutation_count=net.mutation_count, training=training)
    h = x
    for ly in net.layers:
        z = h @ ly.w
        if ly.b is not None:
            z = z + ly.b
        lc = _LayerCache(x_in=h, z=z, pre_act=z)
        if ly.spec.batch_norm:
            if training:
                mu = z.mean(axis=0, keepdims=True)
                var = z.var(axis=0, keepdims=True)
                ly.running_mean = BN_MOMENTUM * ly.running_mean + (1 - BN_MOMENTUM) * mu
                ly.running_var = BN_MOMENTUM * ly.running_var + (1 - BN_MOMENTUM) * var
            else:
                mu, var = ly.running_mean, ly.running_var
            z_hat = (z - mu) / np.sqrt(var + BN_EPS)
            lc.z_hat, lc.batch_var = z_hat, var
            lc.pre_act = ly.gamma * z_hat + ly.beta
        a = ly.spec.activation.evaluate(lc.pre_act)
        if training and ly.spec.dropout_rate > 0:
            keep = 1.0 - ly.spec.dropout_rate
            lc.dropout_mask = (rng.random(a.shape) < keep) / keep
            a = a * lc.dropout_mask
        cache.layers.append(lc)
        h = a
    return h, cache


@dataclass
class Gradients:
    """Per-layer parameter gradients, keyed like Layer.params()."""

    layers: list[dict[str, np.ndarray]]


def backward(net: Network, cache: ForwardCache, loss_grad) -> Gradients:
    """Exact reverse-mode gradients for every weight/bias/batch-norm parameter.

    ``loss_grad`` is dLoss/dPredictions for the batch the cache came from.
    """
    if cache.mutation_count != net.mutation_count:
        raise StaleCacheError("cache predates a parameter update; rerun forward()")
    if len(cache.layers) != len(net.layers):
        raise StaleCacheError("cache does not match this network's layer count")
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.shape != cache.layers[-1].pre_act.shape:
        raise ValueError(f"loss_grad shape {g.shape} does not match predictions")

    grads: list[dict[str, np.ndarray]] = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        ly, lc = net.layers[i], cache.layers[i]
        if lc.dropout_mask is not None:
            g = g * lc.dropout_mask
        g = g * ly.spec.activation.derivative(lc.pre_act)
        entry: dict[str, np.ndarray] = {}
        if ly.spec.batch_norm:
            entry["gamma"] = (g * lc.z_hat).sum(axis=0, keepdims=True)
            entry["beta"] = g.sum(axis=0, keepdims=True)
            if cache.training:
                # backprop through the batch statistics themselves
                n = g.shape[0]
                dz_hat = g * ly.gamma
                inv_std = 1.0 / np.sqrt(lc.batch_var + BN_EPS)
                g = (inv_std / n) * (
                    n * dz_hat
                    - dz_hat.sum(axis=0, keepdims=True)
                    - lc.z_hat * (dz_hat * lc.z_hat).sum(axis=0, keepdims=True)
                )
            else:
                g = g * ly.gamma / np.sqrt(ly.running_var + BN_EPS)
        entry["w"] = lc.x_in.T @ g
        if ly.b is not None:
            entry["b"] = g.sum(axis=0, keepdims=True)
        grads[i] = entry
        if i > 0:
            g = g @ ly.w.T
    return Gradients(layers=grads)


def substitute_activation(net: Network, layer_index: int, new_act: ActivationSpec) -> Network:
    """Copy of the network with one hidden layer's activation replaced.

    Weights are copied untouched; whether to re-initialize afterwards is the
    caller's protocol decision. The output layer is not substitutable.
    """
    if not 0 <= layer_index < net.hidden_count:
        raise ValueError(
            f"layer_index {layer_index} out of range: network has {net.hidden_count} hidden layers"
        )
    out = copy.deepcopy(net)
    ly = out.layers[layer_index]
    ly.spec = replace(ly.spec, activation=new_act)
    _validate_chain([l.spec for l in out.layers])
    return out


def predict_fn(net: Network):
    """Deterministic evaluation closure (training=False, no dropout)."""

    def predict(x) -> np.ndarray:
        out, _ = forward(net, x, training=False)
        return out

    return predict


def network_to_dict(net: Network) -> dict:
    layers = []
    for ly in net.layers:
        s = ly.spec
        layers.append(
            {
                "in_dim": s.in_dim,
                "out_dim": s.out_dim,
                "activation": s.activation.name,
                "alpha": s.activation.alpha,
                "has_bias": s.has_bias,
                "batch_norm": s.batch_norm,
                "dropout_rate": s.dropout_rate,
                "w": ly.w.tolist(),
                "b": None if ly.b is None else ly.b.tolist(),
                "gamma": None if ly.gamma is None else ly.gamma.tolist(),
                "beta": None if ly.beta is None else ly.beta.tolist(),
                "running_mean": None if ly.running_mean is None else ly.running_mean.tolist(),
                "running_var": None if ly.running_var is None else ly.running_var.tolist(),
            }
        )
    return {"seed": net.seed, "layers": layers}


def network_from_dict(doc: dict) -> Network:
    layers = []
    for entry in doc["layers"]:
        spec = LayerSpec(
            in_dim=entry["in_dim"],
            out_dim=entry["out_dim"],
            activation=resolve(entry["activation"], entry.get("alpha")),
            has_bias=entry["has_bias"],
            batch_norm=entry["batch_norm"],
            dropout_rate=entry["dropout_rate"],
        )
        ly = Layer(spec)
        ly.w = np.asarray(entry["w"], dtype=np.float64)
        if entry["b"] is not None:
            ly.b = np.asarray(entry["b"], dtype=np.float64)
        for name in ("gamma", "beta", "running_mean", "running_var"):
            if entry[name] is not None:
                setattr(ly, name, np.asarray(entry[name], dtype=np.float64))
        layers.append(ly)
    return Network(layers, seed=doc["seed"])


def save_network(net: Network, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(network_to_dict(net), fh, sort_keys=True)


def load_network(path) -> Network:
    with open(path, "r", encoding="ascii") as fh:
        return network_from_dict(json.load(fh))
