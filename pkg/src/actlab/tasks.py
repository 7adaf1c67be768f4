"""Synthetic regression targets with declared block-exchangeability.

Nine-dimensional tasks read their input as three 3-vectors u=(x1,x2,x3),
v=(x4,x5,x6), w=(x7,x8,x9):

* ``triangle``        area of the triangle with vertices u, v, w, plus the
                      transformed variants log(1+f), e^f/100, sin(f) and
                      Q(f)=sqrt((f^2+3)/(f+1)); inputs uniform on [-2,2]^9
* ``det3_cos/sin``    cos/sin of det[u;v;w]; inputs standard Gaussian
* ``solid_angle``     spherical-triangle solid angle of three unit vectors
* ``psi``             solid_angle with the ninth coordinate negated
* ``simplex5``        25-dim: volume of the 5-simplex spanned by the origin
                      and five 5-D Gaussian points, |det|/5!

Every target function accepts a single d-vector or an (N, d) batch. The
permutation-candidate helpers at the bottom build the universes the
invariance counts are measured over: for 9-dim tasks, the 6 vertex-block
permutations plus the 6 simultaneous coordinate permutations (12 candidates,
the identity listed in both families); for the simplex, the 10 pairwise
block swaps.
"""
from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .rng import stream

logger = logging.getLogger(__name__)

RESAMPLE_LIMIT = 1000
SINGULAR_DENOMINATOR = 1e-9

TRANSFORM_KINDS = ("log1p", "exp_over_100", "sin", "q")


class SingularInputError(ValueError):
    """The target function is singular at this input (resampling territory)."""


class GenerationError(RuntimeError):
    """The sampler could not produce valid inputs within the resample budget."""


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 1
    if scalar:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected ({dim},) or (N, {dim}) input, got shape {x.shape}")
    return x, scalar


def _maybe_scalar(out: np.ndarray, scalar: bool):
    return float(out[0]) if scalar else out


def triangle_area(x):
    """Area of the triangle with vertices u, v, w (the printed minor formula)."""
    x, scalar = _as_batch(x, 9)
    a = (x[:, 3] - x[:, 0]) * (x[:, 7] - x[:, 1]) - (x[:, 6] - x[:, 0]) * (x[:, 4] - x[:, 1])
    b = (x[:, 3] - x[:, 0]) * (x[:, 8] - x[:, 2]) - (x[:, 6] - x[:, 0]) * (x[:, 5] - x[:, 2])
    c = (x[:, 4] - x[:, 1]) * (x[:, 8] - x[:, 2]) - (x[:, 7] - x[:, 1]) * (x[:, 5] - x[:, 2])
    return _maybe_scalar(0.5 * np.sqrt(a * a + b * b + c * c), scalar)


def transform_labels(kind: str, f):
    """Element-wise growth transform of a base label vector."""
    if kind not in TRANSFORM_KINDS:
        raise ValueError(f"unknown transform {kind!r}; choose from {TRANSFORM_KINDS}")
    f = np.asarray(f, dtype=np.float64)
    if kind == "log1p":
        return np.log1p(f)
    if kind == "exp_over_100":
        return np.exp(f) / 100.0
    if kind == "sin":
        return np.sin(f)
    if np.any(f <= -1.0):
        raise ValueError("q transform requires f > -1")
    return np.sqrt((f * f + 3.0) / (f + 1.0))


def det3_target(x, wave: str = "cosine"):
    """cos or sin of det of the 3x3 matrix with rows u, v, w."""
    if wave not in ("cosine", "sine"):
        raise ValueError(f"wave must be 'cosine' or 'sine', got {wave!r}")
    x, scalar = _as_batch(x, 9)
    det = np.linalg.det(x.reshape(-1, 3, 3))
    return _maybe_scalar(np.cos(det) if wave == "cosine" else np.sin(det), scalar)


def _solid_angle_parts(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u, v, w = x[:, 0:3], x[:, 3:6], x[:, 6:9]
    triple = np.abs(np.einsum("ij,ij->i", np.cross(u, v), w))
    denom = 1.0 + np.einsum("ij,ij->i", u, v) + np.einsum("ij,ij->i", v, w) + np.einsum("ij,ij->i", w, u)
    return triple, denom


def solid_angle(x):
    """Solid angle subtended by three unit vectors u, v, w.

    With z = |(u x v) . w| / (1 + u.v + v.w + w.u) this is 2*atan(z) for
    z >= 0 and 2*pi + 2*atan(z) for z < 0, i.e. 2*atan2(|triple|, denom) —
    the continuous completion across the singular surface denom = 0.
    Inputs with |denom| below 1e-9 raise SingularInputError; the dataset
    sampler resamples them, direct calls surface the error.
    """
    x, scalar = _as_batch(x, 9)
    triple, denom = _solid_angle_parts(x)
    bad = np.abs(denom) < SINGULAR_DENOMINATOR
    if bad.any():
        raise SingularInputError(f"{int(bad.sum())} input(s) with |denominator| < {SINGULAR_DENOMINATOR}")
    return _maybe_scalar(2.0 * np.arctan2(triple, denom), scalar)


def _negate_ninth(x: np.ndarray) -> np.ndarray:
    y = x.copy()
    y[:, 8] = -y[:, 8]
    return y


def psi_target(x):
    """solid_angle with the ninth coordinate negated; exchangeable in u,v only."""
    x, scalar = _as_batch(x, 9)
    return _maybe_scalar(np.asarray(solid_angle(_negate_ninth(x))), scalar)


def simplex_volume_25(x):
    """Volume of the 5-simplex on the origin and five 5-D points: |det|/120."""
    x, scalar = _as_batch(x, 25)
    det = np.linalg.det(x.reshape(-1, 5, 5))
    return _maybe_scalar(np.abs(det) / 120.0, scalar)


# ---------------------------------------------------------------------------
# task registry

@dataclass(frozen=True)
class TaskSpec:
    name: str
    dim: int
    label_fn: Callable[[np.ndarray], np.ndarray]
    sampler: str  # uniform_cube | gaussian | sphere_triples
    sampler_args: tuple = ()
    exchange_blocks: tuple = ()
    invariant_permutation_count: int | None = None
    valid_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def candidate_perms(self) -> list[np.ndarray]:
        if self.dim == 9:
            return nine_dim_candidates()
        if self.name == "simplex5":
            return pair_swap_candidates(5, 5)
        raise ValueError(f"no candidate universe declared for task {self.name}")


def _sphere_valid(x: np.ndarray) -> np.ndarray:
    _, denom = _solid_angle_parts(x)
    return np.abs(denom) >= SINGULAR_DENOMINATOR


def _psi_valid(x: np.ndarray) -> np.ndarray:
    return _sphere_valid(_negate_ninth(x))


_U = (0, 1, 2)
_V = (3, 4, 5)
_W = (6, 7, 8)
_BLOCKS_UVW = ((_U, _V), (_V, _W), (_U, _W))


def _triangle_transformed(kind: str):
    def fn(x):
        return transform_labels(kind, triangle_area(x))

    return fn


TASKS: dict[str, TaskSpec] = {}


def _register(spec: TaskSpec) -> None:
    TASKS[spec.name] = spec


_register(TaskSpec("triangle", 9, triangle_area, "uniform_cube", (-2.0, 2.0), _BLOCKS_UVW, 12))
for _kind in TRANSFORM_KINDS:
    _register(
        TaskSpec(f"triangle_{_kind}", 9, _triangle_transformed(_kind), "uniform_cube", (-2.0, 2.0), _BLOCKS_UVW, 12)
    )
_register(TaskSpec("det3_cos", 9, lambda x: det3_target(x, "cosine"), "gaussian", (), _BLOCKS_UVW, 12))
_register(TaskSpec("det3_sin", 9, lambda x: det3_target(x, "sine"), "gaussian", (), (), 6))
_register(
    TaskSpec("solid_angle", 9, solid_angle, "sphere_triples", (), _BLOCKS_UVW, 12, _sphere_valid)
)
_register(TaskSpec("psi", 9, psi_target, "sphere_triples", (), ((_U, _V),), 4, _psi_valid))
_register(
    TaskSpec(
        "simplex5",
        25,
        simplex_volume_25,
        "gaussian",
        (),
        tuple(
            (tuple(range(5 * i, 5 * i + 5)), tuple(range(5 * j, 5 * j + 5)))
            for i, j in itertools.combinations(range(5), 2)
        ),
        10,
    )
)


def task_names() -> tuple[str, ...]:
    return tuple(TASKS)


def get_task(name: str) -> TaskSpec:
    try:
        return TASKS[name]
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from {', '.join(TASKS)}") from None


# ---------------------------------------------------------------------------
# sampling and datasets

@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    task_name: str
    exchange_blocks: tuple
    seed: int
    noise_fraction: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.x.ndim != 2 or self.x.shape[0] != self.y.size:
            raise ValueError(f"x shape {self.x.shape} inconsistent with {self.y.size} labels")
        for a, b in self.exchange_blocks:
            if len(a) != len(b) or set(a) & set(b):
                raise ValueError(f"exchange blocks must be equal-length and disjoint: {a} vs {b}")
            if not all(0 <= i < self.x.shape[1] for i in (*a, *b)):
                raise ValueError(f"exchange block index out of range for dim {self.x.shape[1]}")

    @property
    def n(self) -> int:
        return self.y.size


def _draw(task: TaskSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if task.sampler == "uniform_cube":
        lo, hi = task.sampler_args
        return rng.uniform(lo, hi, size=(n, task.dim))
    if task.sampler == "gaussian":
        return rng.standard_normal(size=(n, task.dim))
    if task.sampler == "sphere_triples":
        x = rng.standard_normal(size=(n, task.dim))
        for b in range(0, task.dim, 3):
            x[:, b : b + 3] /= np.linalg.norm(x[:, b : b + 3], axis=1, keepdims=True)
        return x
    raise ValueError(f"unknown sampler {task.sampler!r}")


def generate_dataset(task: TaskSpec | str, n: int, seed: int) -> Dataset:
    """Deterministic dataset for (task, n, seed); singular rows are resampled."""
    if isinstance(task, str):
        task = get_task(task)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = stream(seed, "data", task.name)
    x = _draw(task, n, rng)
    resampled = 0
    if task.valid_fn is not None:
        for _ in range(RESAMPLE_LIMIT):
            bad = ~task.valid_fn(x)
            n_bad = int(bad.sum())
            if n_bad == 0:
                break
            x[bad] = _draw(task, n_bad, rng)
            resampled += n_bad
        else:
            raise GenerationError(
                f"task {task.name}: singular inputs persisted through {RESAMPLE_LIMIT} resample rounds"
            )
    if resampled:
        logger.debug("task %s: resampled %d singular input(s)", task.name, resampled)
    y = np.asarray(task.label_fn(x), dtype=np.float64)
    return Dataset(x=x, y=y, task_name=task.name, exchange_blocks=task.exchange_blocks, seed=seed)


def add_label_noise(y, fraction: float, seed: int) -> np.ndarray:
    """Gaussian label noise with std = fraction * std(y), deterministic in seed.

    A constant label vector has no scale; the vector is returned unchanged
    with a warning in that case.
    """
    if fraction < 0:
        raise ValueError(f"fraction must be >= 0, got {fraction}")
    y = np.asarray(y, dtype=np.float64)
    if fraction == 0:
        return y.copy()
    scale = float(np.std(y))
    if scale == 0.0:
        warnings.warn("labels are constant; no noise scale, returning labels unchanged")
        return y.copy()
    rng = stream(seed, "label-noise")
    return y + rng.standard_normal(y.shape) * (fraction * scale)


def with_label_noise(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Copy of the dataset with noised labels and the fraction recorded."""
    return replace(ds, y=add_label_noise(ds.y, fraction, seed), noise_fraction=fraction)


def save_dataset(ds: Dataset, stem) -> tuple[str, str]:
    """Write <stem>.csv (x1..xd,y rows) and a <stem>.json metadata sidecar."""
    stem = str(stem)
    csv_path, meta_path = stem + ".csv", stem + ".json"
    d = ds.x.shape[1]
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write(",".join([f"x{i + 1}" for i in range(d)] + ["y"]) + "\n")
        for row, label in zip(ds.x, ds.y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{float(label)!r}\n")
    meta = {
        "task": ds.task_name,
        "n": ds.n,
        "seed": ds.seed,
        "noise_fraction": ds.noise_fraction,
        "exchange_blocks": [[list(a), list(b)] for a, b in ds.exchange_blocks],
    }
    with open(meta_path, "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, meta_path


def load_dataset(stem) -> Dataset:
    stem = str(stem)
    if stem.endswith(".csv") or stem.endswith(".json"):
        stem = stem.rsplit(".", 1)[0]
    with open(stem + ".json", "r", encoding="ascii") as fh:
        meta = json.load(fh)
    rows = np.loadtxt(stem + ".csv", delimiter=",", skiprows=1, ndmin=2)
    return Dataset(
        x=rows[:, :-1],
        y=rows[:, -1],
        task_name=meta["task"],
        exchange_blocks=tuple((tuple(a), tuple(b)) for a, b in meta["exchange_blocks"]),
        seed=meta["seed"],
        noise_fraction=meta["noise_fraction"],
    )


# ---------------------------------------------------------------------------
# permutation candidates

def apply_perm(x, perm: np.ndarray) -> np.ndarray:
    """Permuted copy: output feature i reads input feature perm[i]."""
    return np.asarray(x)[..., perm]


def vertex_block_perms(n_blocks: int, block_size: int) -> list[np.ndarray]:
    """All permutations of the contiguous blocks (identity included)."""
    out = []
    for sigma in itertools.permutations(range(n_blocks)):
        idx = np.empty(n_blocks * block_size, dtype=np.intp)
        for i, s in enumerate(sigma):
            idx[block_size * i : block_size * (i + 1)] = np.arange(
                block_size * s, block_size * (s + 1)
            )
        out.append(idx)
    return out


def coordinate_perms(n_blocks: int, block_size: int) -> list[np.ndarray]:
    """Simultaneous within-block position permutations (identity included).

    For 9-dim tasks these permute the groups (x1,x4,x7), (x2,x5,x8),
    (x3,x6,x9) — the same coordinate slot across all blocks.
    """
    out = []
    for sigma in itertools.permutations(range(block_size)):
        idx = np.empty(n_blocks * block_size, dtype=np.intp)
        for b in range(n_blocks):
            for j, s in enumerate(sigma):
                idx[block_size * b + j] = block_size * b + s
        out.append(idx)
    return out


def nine_dim_candidates() -> list[np.ndarray]:
    """The declared 12-candidate universe for 9-dim tasks.

    Six vertex-block permutations plus six coordinate permutations, counted
    as listed (the identity belongs to both families).
    """
    return vertex_block_perms(3, 3) + coordinate_perms(3, 3)


def pair_swap_candidates(n_blocks: int, block_size: int) -> list[np.ndarray]:
    """One candidate per unordered block pair swap (identity excluded)."""
    out = []
    for i, j in itertools.combinations(range(n_blocks), 2):
        idx = np.arange(n_blocks * block_size, dtype=np.intp)
        bi = np.arange(block_size * i, block_size * (i + 1))
        bj = np.arange(block_size * j, block_size * (j + 1))
        idx[bi], idx[bj] = bj, bi
        out.append(idx)
    return out
