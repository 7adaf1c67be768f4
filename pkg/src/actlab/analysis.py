"""Verifiers for the package's linear-algebra story.

Three families of checks live here:

* the closed-form least-squares output layer (:func:`solve_head`): fitting
  y ~ G alpha + beta against the column-centered feature matrix via the
  pseudoinverse;
* rank experiments: a polynomial of degree p caps the rank of g(XW + 1b) at
  C(d+p, p) no matter how wide W is, while a non-polynomial activation can
  reach any rank m <= N. Both explicit constructions are implemented: the
  smooth rank-one construction W = w (t1..tm) with a searched shared bias,
  and the relu staircase whose activation matrix is triangular by build;
* exchangeability diagnostics for predictors: the block-swap gap
  max |f(u,v,w) - f(v,u,w)| and the antisymmetric-slice gap
  max |f(u,-u,0) - f(-u,u,0)| (exactly zero for a bias-free even first
  layer), plus invariance counting over a declared permutation universe.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .activations import ActivationSpec, catalog_get
from .linalg import as_matrix, column_means, numerical_rank, pinv
from .rng import stream

DISTINCT_GAP = 1e-9
DIRECTION_TRIES = 64
B0_BUDGET = 64


class ConstructionError(RuntimeError):
    """A weight construction could not satisfy its preconditions."""


@dataclass(frozen=True)
class HeadSolution:
    """Least-squares affine fit y ~ G alpha + beta."""

    alpha: np.ndarray
    beta: float
    residual: np.ndarray

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))


def solve_head(g_matrix, y, rcond: float = 1e-12) -> HeadSolution:
    """Closed-form output-layer solution via the centered pseudoinverse.

    alpha = (G - 1 colmeans(G))^+ y and beta = mean(y) - colmeans(G) alpha;
    centering decouples the intercept, so this is the global least-squares
    affine fit (minimum-norm in alpha when the centered columns are rank
    deficient).
    """
    g = as_matrix(g_matrix)
    y = np.asarray(y, dtype=np.float64).ravel()
    if g.shape[0] != y.size:
        raise ValueError(f"G has {g.shape[0]} rows but y has {y.size} entries")
    if y.size < 2:
        raise ValueError("need at least two samples for an affine fit")
    means = column_means(g)
    alpha = pinv(g - means, rcond=rcond) @ y
    beta = float(np.mean(y) - means.ravel() @ alpha)
    residual = y - (g @ alpha + beta)
    return HeadSolution(alpha=alpha, beta=beta, residual=residual)


def polynomial_rank_bound(d: int, p: int) -> int:
    """C(d+p, p): the rank ceiling of a degree-p polynomial's feature matrix."""
    if d < 1 or p < 0:
        raise ValueError(f"need d >= 1 and p >= 0, got d={d}, p={p}")
    bound = math.comb(d + p, p)
    if bound > 2**63 - 1:
        raise OverflowError(f"C({d + p},{p}) exceeds 64-bit range")
    return bound


def _distinct_direction(x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Unit direction whose projections of the rows of x are pairwise distinct."""
    n, d = x.shape
    for _ in range(DIRECTION_TRIES):
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        c = x @ w
        gaps = np.diff(np.sort(c))
        if gaps.size == 0 or gaps.min() > DISTINCT_GAP:
            return w, c
    raise ConstructionError(
        f"no direction with pairwise-distinct projections (gap > {DISTINCT_GAP}) in {DIRECTION_TRIES} tries"
    )


@dataclass(frozen=True)
class Rank1Construction:
    w_matrix: np.ndarray
    bias_row: np.ndarray
    achieved_rank: int
    target_rank: int
    bias_value: float
    draws_used: int

    @property
    def succeeded(self) -> bool:
        return self.achieved_rank == self.target_rank


def construct_rank1_weights(
    x, m: int, activation: ActivationSpec, seed: int, budget: int = B0_BUDGET
) -> Rank1Construction:
    """Rank-one weight construction W = w (t1,...,tm), shared bias b0.

    t_k = k (distinct integers; the construction only needs distinct values,
    and an order-one spread keeps the activation matrix numerically full
    rank). b0 is searched over the fixed candidates {0.5, 1.0} followed by
    Uniform(-2, 2) draws until g(XW + 1b) reaches numerical rank m or the
    budget is exhausted; the best attempt is returned either way, with its
    rank, so a failed search is visible rather than silent.
    """
    x = as_matrix(x)
    n = x.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got m={m}")
    rng = stream(seed, "rank1", m)
    w, c = _distinct_direction(x, rng)
    t = np.arange(1.0, m + 1.0)
    best_rank, best_b0, draws = -1, None, 0
    candidates = iter([0.5, 1.0])
    while draws < budget:
        b0 = next(candidates, None)
        if b0 is None:
            b0 = float(rng.uniform(-2.0, 2.0))
            if b0 == 0.0:  # even activations have vanishing odd derivatives at 0
                continue
        draws += 1
        g = activation.evaluate(np.outer(c, t) + b0)
        rank = numerical_rank(g)
        if rank > best_rank:
            best_rank, best_b0 = rank, b0
        if best_rank == m:
            break
    return Rank1Construction(
        w_matrix=np.outer(w, t),
        bias_row=np.full((1, m), best_b0),
        achieved_rank=best_rank,
        target_rank=m,
        bias_value=best_b0,
        draws_used=draws,
    )


def construct_relu_staircase(x, m: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Relu staircase weights: exact rank m by triangular structure.

    All m columns share one direction w; with projections sorted descending
    c_1 > ... > c_N, the k-th bias threshold is the midpoint s_k between c_k
    and c_{k+1} (s_N = c_N - 1 when m = N), so column k of relu(XW + 1b) has
    nonzero entries exactly on the k largest projections.
    """
    x = as_matrix(x)
    n = x.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got m={m}")
    rng = stream(seed, "staircase", m)
    w, c = _distinct_direction(x, rng)
    c_sorted = np.sort(c)[::-1]
    s = np.empty(m)
    for k in range(m):
        if k + 1 < n:
            s[k] = 0.5 * (c_sorted[k] + c_sorted[k + 1])
        else:
            s[k] = c_sorted[k] - 1.0
    return np.outer(w, np.ones(m)), -s[None, :]


@dataclass(frozen=True)
class RankReport:
    activation: str
    construction: str  # random | rank1_smooth | relu_staircase
    d: int
    n: int
    m: int
    achieved_rank: int
    theoretical_bound: int | None
    tol_factor: float

    def __post_init__(self):
        if self.achieved_rank > min(self.n, self.m):
            raise ValueError("achieved rank cannot exceed min(N, m)")

    def to_dict(self) -> dict:
        return asdict(self)


def rank_experiment(
    construction: str,
    x,
    m: int,
    activation: ActivationSpec | None = None,
    seed: int = 0,
    tol_factor: float = 1.0,
    poly_degree: int | None = None,
) -> RankReport:
    """Build g(XW + 1b) by the requested construction and measure its rank.

    ``poly_degree`` attaches the C(d+p, p) ceiling to the report (used when
    the activation is the degree-p reference monomial).
    """
    x = as_matrix(x)
    n, d = x.shape
    if construction == "relu_staircase":
        activation = catalog_get("relu")
        w_mat, b_row = construct_relu_staircase(x, m, seed)
        achieved = numerical_rank(activation.evaluate(x @ w_mat + b_row), tol_factor)
    elif construction == "rank1_smooth":
        if activation is None:
            raise ValueError("rank1_smooth needs an activation")
        built = construct_rank1_weights(x, m, activation, seed)
        achieved = built.achieved_rank
    elif construction == "random":
        if activation is None:
            raise ValueError("random construction needs an activation")
        rng = stream(seed, "random-features")
        w_mat = rng.standard_normal((d, m))
        b_row = rng.standard_normal((1, m))
        achieved = numerical_rank(activation.evaluate(x @ w_mat + b_row), tol_factor)
    else:
        raise ValueError(f"unknown construction {construction!r}")
    bound = polynomial_rank_bound(d, poly_degree) if poly_degree is not None else None
    return RankReport(
        activation=activation.key,
        construction=construction,
        d=d,
        n=n,
        m=m,
        achieved_rank=achieved,
        theoretical_bound=bound,
        tol_factor=tol_factor,
    )


@dataclass(frozen=True)
class ExchangeabilityReport:
    swap_gap: float
    antisym_gap: float
    n_samples: int
    block_size: int
    dim: int

    def to_dict(self) -> dict:
        return asdict(self)


def check_exchangeability(
    predict: Callable[[np.ndarray], np.ndarray], k: int, d: int, n_samples: int = 100, seed: int = 0
) -> ExchangeabilityReport:
    """Measure how far a predictor is from (u, v)-block exchangeability.

    swap_gap: max |f(u,v,w) - f(v,u,w)| over uniform inputs in [-1,1]^d.
    antisym_gap: max |f(u,-u,0) - f(-u,u,0)| — the slice where an even,
    bias-free first layer forces exact equality.
    """
    if d < 2 * k:
        raise ValueError(f"need d >= 2k, got d={d}, k={k}")
    rng = stream(seed, "exchange-check")
    x = rng.uniform(-1.0, 1.0, size=(n_samples, d))
    swapped = x.copy()
    swapped[:, :k], swapped[:, k : 2 * k] = x[:, k : 2 * k], x[:, :k]
    swap_gap = float(np.max(np.abs(_eval(predict, x) - _eval(predict, swapped))))

    u = rng.uniform(-1.0, 1.0, size=(n_samples, k))
    pos = np.zeros((n_samples, d))
    pos[:, :k], pos[:, k : 2 * k] = u, -u
    neg = np.zeros((n_samples, d))
    neg[:, :k], neg[:, k : 2 * k] = -u, u
    antisym_gap = float(np.max(np.abs(_eval(predict, pos) - _eval(predict, neg))))
    return ExchangeabilityReport(
        swap_gap=swap_gap, antisym_gap=antisym_gap, n_samples=n_samples, block_size=k, dim=d
    )


def _eval(predict, x: np.ndarray) -> np.ndarray:
    return np.asarray(predict(x), dtype=np.float64).ravel()


def count_invariant_permutations(
    label_fn: Callable[[np.ndarray], np.ndarray],
    candidates: Sequence[np.ndarray],
    n_samples: int = 100,
    tol: float = 1e-9,
    seed: int = 0,
    sample_fn: Callable[[int, np.random.Generator], np.ndarray] | None = None,
) -> int:
    """Number of candidate permutations under which label_fn is invariant.

    Candidates are counted as listed (a universe may list the identity in
    more than one family). ``tol`` is relative with a unit floor:
    |f(pi x) - f(x)| <= tol * max(1, |f(x)|, |f(pi x)|) must hold on every
    sample. ``sample_fn(n, rng)`` overrides the standard-normal default for
    targets with a constrained domain (e.g. unit-sphere triples).
    """
    if not candidates:
        raise ValueError("candidate list is empty")
    rng = stream(seed, "perm-count")
    d = len(candidates[0])
    x = sample_fn(n_samples, rng) if sample_fn else rng.standard_normal((n_samples, d))
    base = np.asarray(label_fn(x), dtype=np.float64)
    count = 0
    for perm in candidates:
        vals = np.asarray(label_fn(x[:, perm]), dtype=np.float64)
        scale = np.maximum(1.0, np.maximum(np.abs(base), np.abs(vals)))
        if np.all(np.abs(vals - base) <= tol * scale):
            count += 1
    return count
