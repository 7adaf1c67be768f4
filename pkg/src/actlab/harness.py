"""Config-driven experiment runner for the activation-substitution protocol.

A comparison trains, per trial seed, a baseline network and an otherwise
identical network whose designated hidden layer uses a different activation
(fresh initialization from the same seed, same data, same hyperparameters —
the substitution is the only difference, and that is asserted by diffing the
serialized layer specs). Each arm sweeps the learning-rate list and keeps
the run with the best final test loss. Reports aggregate per-trial test
MAE/MSE into medians and baseline/substituted improvement ratios.

Everything downstream of a config is a pure function of (config, seeds):
completed runs are memoized in-process by their canonical request key, which
also lets a layer sweep reuse its baseline arms across positions. Report
files contain no timestamps or wall-clock data, so re-running a config
rewrites them byte-identically.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .activations import resolve
from .network import Network, init_network, mlp_specs, network_to_dict, predict_fn, substitute_activation
from .optim import TrainConfig, TrainHistory, make_optimizer, train
from .rng import stream
from .tasks import generate_dataset, get_task, with_label_noise

PAPER_SCALE = {"n_train": 10000, "n_test": 2000, "epochs": 500, "seeds": (1, 2, 3, 4, 5)}


@dataclass(frozen=True)
class Substitution:
    activation: str
    alpha: float | None = None
    layer_index: int | None = None  # None = to be chosen (e.g. by a layer sweep)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "triangle"
    n_train: int = 2000
    n_test: int = 500
    hidden: tuple[int, ...] = (100, 100, 100, 100)
    baseline_activation: str = "relu"
    baseline_alpha: float | None = None
    substitution: Substitution | None = None
    loss: str = "mae"
    optimizer: str = "rmsprop"
    momentum: float = 0.9  # sgd only
    lr_sweep: tuple[float, ...] = (0.001, 0.003, 0.005)
    epochs: int = 100
    batch_size: int = 100
    lr_halving_period: int = 100
    noise_fraction: float = 0.0
    seeds: tuple[int, ...] = (1, 2, 3)
    out_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        get_task(self.task)
        resolve(self.baseline_activation, self.baseline_alpha)
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if not self.hidden:
            raise ValueError("need at least one hidden layer")
        if not self.seeds:
            raise ValueError("need at least one trial seed")
        if not self.lr_sweep:
            raise ValueError("need at least one learning rate")
        if self.substitution is not None:
            resolve(self.substitution.activation, self.substitution.alpha)
            idx = self.substitution.layer_index
            if idx is not None and not 0 <= idx < len(self.hidden):
                raise ValueError(f"substitution layer {idx} out of range for {len(self.hidden)} hidden layers")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        doc["lr_sweep"] = list(self.lr_sweep)
        doc["seeds"] = list(self.seeds)
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if doc.get("substitution") is not None:
            doc["substitution"] = Substitution(**doc["substitution"])
        for key in ("hidden", "lr_sweep", "seeds"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return ExperimentConfig(**doc)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def paper_scale(config: ExperimentConfig) -> ExperimentConfig:
    """Switch desk-scale settings to the full 10000/2000/500-epoch/5-seed protocol."""
    return replace(config, **PAPER_SCALE)


def _subseed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------------------
# single runs


@dataclass
class RunOutcome:
    final_test_mae: float
    final_test_mse: float
    final_test_loss: float
    history: TrainHistory
    wall_time_s: float


def _run_request(config: ExperimentConfig, seed: int, substitution: Substitution | None, lr: float) -> dict:
    sub = None
    if substitution is not None:
        sub = {
            "activation": substitution.activation,
            "alpha": substitution.alpha,
            "layer_index": substitution.layer_index,
        }
    return {
        "task": config.task,
        "n_train": config.n_train,
        "n_test": config.n_test,
        "hidden": list(config.hidden),
        "activation": config.baseline_activation,
        "alpha": config.baseline_alpha,
        "substitution": sub,
        "loss": config.loss,
        "optimizer": config.optimizer,
        "momentum": config.momentum,
        "lr": lr,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "lr_halving_period": config.lr_halving_period,
        "noise_fraction": config.noise_fraction,
        "seed": seed,
    }


def _request_key(request: dict) -> str:
    return json.dumps(request, sort_keys=True)


def build_networks(request: dict) -> tuple[Network, Network | None]:
    """Baseline network and, if requested, its substituted twin (same init seed)."""
    task = get_task(request["task"])
    dims = [task.dim] + list(request["hidden"]) + [1]
    act = resolve(request["activation"], request["alpha"])
    net = init_network(mlp_specs(dims, act), seed=request["seed"])
    sub = request.get("substitution")
    if sub is None:
        return net, None
    sub_net = substitute_activation(net, sub["layer_index"], resolve(sub["activation"], sub["alpha"]))
    return net, sub_net


def execute_run(request: dict) -> tuple[Network, RunOutcome]:
    """Train one network per the request; deterministic in the request alone."""
    t0 = time.perf_counter()
    seed = request["seed"]
    train_ds = generate_dataset(request["task"], request["n_train"], _subseed(seed, "train-data"))
    test_ds = generate_dataset(request["task"], request["n_test"], _subseed(seed, "test-data"))
    if request["noise_fraction"] > 0:
        train_ds = with_label_noise(train_ds, request["noise_fraction"], _subseed(seed, "label-noise"))
    base_net, sub_net = build_networks(request)
    net = sub_net if sub_net is not None else base_net
    tc = TrainConfig(
        epochs=request["epochs"],
        batch_size=request["batch_size"],
        base_lr=request["lr"],
        lr_halving_period=request["lr_halving_period"],
        loss=request["loss"],
        seed=seed,
    )
    optimizer = make_optimizer(request["optimizer"], request["lr"], request["momentum"])
    net, history = train(net, train_ds, test_ds, tc, optimizer)
    pred = predict_fn(net)(test_ds.x).ravel()
    resid = pred - test_ds.y
    outcome = RunOutcome(
        final_test_mae=float(np.mean(np.abs(resid))),
        final_test_mse=float(np.mean(resid * resid)),
        final_test_loss=history.test_loss[-1],
        history=history,
        wall_time_s=time.perf_counter() - t0,
    )
    return net, outcome


_RUN_CACHE: dict[str, RunOutcome] = {}


def clear_run_cache() -> None:
    _RUN_CACHE.clear()


def _cached_run(request: dict) -> RunOutcome:
    key = _request_key(request)
    if key not in _RUN_CACHE:
        _, outcome = execute_run(request)
        _RUN_CACHE[key] = outcome
    return _RUN_CACHE[key]


def _cached_run_for_pool(request: dict) -> tuple[str, RunOutcome]:
    return _request_key(request), execute_run(request)[1]


def _prefill_cache(requests: list[dict], workers: int) -> None:
    missing = [r for r in requests if _request_key(r) not in _RUN_CACHE]
    if not missing:
        return
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, outcome in pool.map(_cached_run_for_pool, missing):
                _RUN_CACHE[key] = outcome
    else:
        for request in missing:
            _cached_run(request)


@dataclass
class ArmResult:
    seed: int
    arm: str  # baseline | substituted
    activation: str
    substitution_layer: int | None
    chosen_lr: float
    test_mae: float
    test_mse: float
    per_lr_final_test_loss: dict[float, float]
    history: TrainHistory


def run_arm(config: ExperimentConfig, seed: int, substitution: Substitution | None) -> ArmResult:
    """Sweep the lr list for one arm and keep the best final-test-loss run."""
    outcomes = {}
    for lr in config.lr_sweep:
        outcomes[lr] = _cached_run(_run_request(config, seed, substitution, lr))
    chosen_lr = min(config.lr_sweep, key=lambda lr: (outcomes[lr].final_test_loss, lr))
    best = outcomes[chosen_lr]
    if substitution is None:
        act = resolve(config.baseline_activation, config.baseline_alpha).key
    else:
        act = resolve(substitution.activation, substitution.alpha).key
    return ArmResult(
        seed=seed,
        arm="baseline" if substitution is None else "substituted",
        activation=act,
        substitution_layer=None if substitution is None else substitution.layer_index,
        chosen_lr=chosen_lr,
        test_mae=best.final_test_mae,
        test_mse=best.final_test_mse,
        per_lr_final_test_loss={lr: outcomes[lr].final_test_loss for lr in config.lr_sweep},
        history=best.history,
    )


@dataclass
class RunReport:
    task: str
    arm: str
    activation: str
    substitution: dict | None
    seed: int
    chosen_lr: float
    final_test_mae: float
    final_test_mse: float
    history: TrainHistory
    config: dict
    wall_time_s: float  # informational; excluded from determinism guarantees
    version: str = __version__

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["history"] = {
            "epoch": self.history.epoch,
            "lr": self.history.lr,
            "train_loss": self.history.train_loss,
            "test_loss": self.history.test_loss,
        }
        return doc


def run_single(config: ExperimentConfig, seed: int) -> RunReport:
    """One fully-specified run: substituted arm if the config names a layer."""
    t0 = time.perf_counter()
    sub = config.substitution if config.substitution and config.substitution.layer_index is not None else None
    arm = run_arm(config, seed, sub)
    return RunReport(
        task=config.task,
        arm=arm.arm,
        activation=arm.activation,
        substitution=None if sub is None else asdict(sub),
        seed=seed,
        chosen_lr=arm.chosen_lr,
        final_test_mae=arm.test_mae,
        final_test_mse=arm.test_mse,
        history=arm.history,
        config=config.to_dict(),
        wall_time_s=time.perf_counter() - t0,
    )


def trained_network(config: ExperimentConfig, seed: int) -> tuple[Network, RunReport]:
    """run_single plus the trained network itself (bypasses the cache)."""
    report = run_single(config, seed)
    sub = config.substitution if config.substitution and config.substitution.layer_index is not None else None
    net, _ = execute_run(_run_request(config, seed, sub, report.chosen_lr))
    return net, report


# ---------------------------------------------------------------------------
# comparisons


@dataclass
class ComparisonReport:
    task: str
    baseline_activation: str
    substitution: dict
    seeds: list[int]
    trials: list[dict]
    median_baseline_mae: float
    median_substituted_mae: float
    median_baseline_mse: float
    median_substituted_mse: float
    improvement_ratio_mae: float
    improvement_ratio_mse: float
    config: dict
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


def _assert_substitution_only_diff(config: ExperimentConfig, substitution: Substitution) -> None:
    """The two arms must differ in exactly one layer's activation, pre-training."""
    request = _run_request(config, config.seeds[0], substitution, config.lr_sweep[0])
    base_net, sub_net = build_networks(request)
    base_doc, sub_doc = network_to_dict(base_net), network_to_dict(sub_net)
    diffs = []
    for i, (a, b) in enumerate(zip(base_doc["layers"], sub_doc["layers"])):
        for field_name in a:
            if json.dumps(a[field_name]) != json.dumps(b[field_name]):
                diffs.append((i, field_name))
    expected = {(substitution.layer_index, "activation"), (substitution.layer_index, "alpha")}
    same_act = (
        resolve(config.baseline_activation, config.baseline_alpha).key
        == resolve(substitution.activation, substitution.alpha).key
    )
    missing = not same_act and (substitution.layer_index, "activation") not in diffs
    if not set(diffs) <= expected or missing:
        raise RuntimeError(f"substitution protocol violated; unexpected diffs: {diffs}")


def run_comparison(config: ExperimentConfig) -> ComparisonReport:
    """Paired baseline-vs-substituted trials over the config's seed list."""
    sub = config.substitution
    if sub is None or sub.layer_index is None:
        raise ValueError("run_comparison needs a substitution with a layer index")
    _assert_substitution_only_diff(config, sub)
    requests = [
        _run_request(config, seed, s, lr)
        for seed in config.seeds
        for s in (None, sub)
        for lr in config.lr_sweep
    ]
    _prefill_cache(requests, config.workers)
    trials = []
    for seed in config.seeds:
        base = run_arm(config, seed, None)
        subbed = run_arm(config, seed, sub)
        trials.append(
            {
                "seed": seed,
                "baseline_mae": base.test_mae,
                "baseline_mse": base.test_mse,
                "baseline_lr": base.chosen_lr,
                "substituted_mae": subbed.test_mae,
                "substituted_mse": subbed.test_mse,
                "substituted_lr": subbed.chosen_lr,
            }
        )
    med = {
        key: float(np.median([t[key] for t in trials]))
        for key in ("baseline_mae", "substituted_mae", "baseline_mse", "substituted_mse")
    }
    return ComparisonReport(
        task=config.task,
        baseline_activation=resolve(config.baseline_activation, config.baseline_alpha).key,
        substitution={"activation": sub.activation, "alpha": sub.alpha, "layer_index": sub.layer_index},
        seeds=list(config.seeds),
        trials=trials,
        median_baseline_mae=med["baseline_mae"],
        median_substituted_mae=med["substituted_mae"],
        median_baseline_mse=med["baseline_mse"],
        median_substituted_mse=med["substituted_mse"],
        improvement_ratio_mae=med["baseline_mae"] / med["substituted_mae"],
        improvement_ratio_mse=med["baseline_mse"] / med["substituted_mse"],
        config=config.to_dict(),
    )


def run_layer_sweep(config: ExperimentConfig) -> list[ComparisonReport]:
    """One comparison per hidden-layer position, sharing seeds and baselines.

    Baseline arms are trained once per seed and reused across positions via
    the run cache.
    """
    if config.substitution is None:
        raise ValueError("run_layer_sweep needs a substitution activation")
    positions = list(range(len(config.hidden)))
    requests = [_run_request(config, seed, None, lr) for seed in config.seeds for lr in config.lr_sweep]
    for idx in positions:
        sub = replace(config.substitution, layer_index=idx)
        requests += [
            _run_request(config, seed, sub, lr) for seed in config.seeds for lr in config.lr_sweep
        ]
    _prefill_cache(requests, config.workers)
    return [
        run_comparison(replace(config, substitution=replace(config.substitution, layer_index=idx)))
        for idx in positions
    ]


# ---------------------------------------------------------------------------
# report emission


def emit_report(report: ComparisonReport, out_dir) -> list[Path]:
    """Write summary.json, trials.csv, and plot-ready bar-chart data.

    Deterministic: rerunning the same config overwrites byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.json"
    with open(summary, "w", encoding="ascii") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    trials_csv = out / "trials.csv"
    with open(trials_csv, "w", encoding="ascii") as fh:
        fh.write("seed,arm,activation,substitution_layer,chosen_lr,test_mae,test_mse\n")
        for t in sorted(report.trials, key=lambda t: t["seed"]):
            fh.write(
                f"{t['seed']},baseline,{report.baseline_activation},,"
                f"{t['baseline_lr']!r},{t['baseline_mae']!r},{t['baseline_mse']!r}\n"
            )
            sub_act = report.substitution["activation"]
            fh.write(
                f"{t['seed']},substituted,{sub_act},{report.substitution['layer_index']},"
                f"{t['substituted_lr']!r},{t['substituted_mae']!r},{t['substituted_mse']!r}\n"
            )

    plot_csv = out / "plotdata.csv"
    with open(plot_csv, "w", encoding="ascii") as fh:
        fh.write("task,baseline_activation,arm,median_mae\n")
        fh.write(f"{report.task},{report.baseline_activation},baseline,{report.median_baseline_mae!r}\n")
        fh.write(
            f"{report.task},{report.baseline_activation},substituted,{report.median_substituted_mae!r}\n"
        )
    return [summary, trials_csv, plot_csv]
