"""actlab: even-activation experiments on block-exchangeable regression.

A small, dependency-light lab for studying how the choice of scalar
activation shapes what a dense network can fit: numerical-rank experiments
on activation feature matrices, the closed-form least-squares output layer,
an activation catalog around the even ``seagull`` function log(1+x^2), and
a deterministic harness that reproduces the first-layer substitution
protocol on synthetic exchangeable targets.
"""

__version__ = "0.1.0"

from .activations import ActivationSpec, catalog_get
from .harness import ExperimentConfig, Substitution, run_comparison, run_layer_sweep, run_single
from .network import Network, forward, init_network, predict_fn, substitute_activation
from .optim import TrainConfig, train
from .tasks import Dataset, generate_dataset, get_task

__all__ = [
    "__version__",
    "ActivationSpec",
    "catalog_get",
    "ExperimentConfig",
    "Substitution",
    "run_comparison",
    "run_layer_sweep",
    "run_single",
    "Network",
    "forward",
    "init_network",
    "predict_fn",
    "substitute_activation",
    "TrainConfig",
    "train",
    "Dataset",
    "generate_dataset",
    "get_task",
]
