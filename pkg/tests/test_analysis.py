import numpy as np
import pytest

from actlab.activations import catalog_get, monomial
from actlab.analysis import (
    ConstructionError,
    check_exchangeability,
    construct_rank1_weights,
    construct_relu_staircase,
    count_invariant_permutations,
    polynomial_rank_bound,
    rank_experiment,
    solve_head,
)
from actlab.linalg import numerical_rank
from actlab.network import init_network, mlp_specs, predict_fn
from actlab.rng import stream
from actlab.tasks import (
    coordinate_perms,
    generate_dataset,
    get_task,
    nine_dim_candidates,
    pair_swap_candidates,
    triangle_area,
    vertex_block_perms,
)

SEA = catalog_get("seagull")
RELU = catalog_get("relu")


# ---------------------------------------------------------------------------
# closed-form head

def test_solve_head_exact_affine_fit():
    sol = solve_head([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
    assert sol.alpha == pytest.approx([2.0], abs=1e-12)
    assert sol.beta == pytest.approx(0.0, abs=1e-12)
    assert sol.residual_norm <= 1e-12


def test_solve_head_constant_targets():
    g = stream(0, "head").standard_normal((20, 4))
    sol = solve_head(g, np.full(20, 7.5))
    assert np.max(np.abs(sol.alpha)) <= 1e-10
    assert sol.beta == pytest.approx(7.5, abs=1e-10)


def normal_equations_fit(g, y):
    """Independent oracle: solve the augmented [G | 1] normal equations."""
    a = np.hstack([g, np.ones((g.shape[0], 1))])
    theta = np.linalg.solve(a.T @ a, a.T @ y)
    return theta[:-1], theta[-1]


def test_solve_head_matches_normal_equations_oracle():
    rng = stream(1, "head-oracle")
    for trial in range(50):
        n = int(rng.integers(10, 101))
        m = int(rng.integers(1, 17))
        g = rng.standard_normal((n, m)) * rng.uniform(0.1, 10)
        y = rng.standard_normal(n) * rng.uniform(0.1, 10)
        sol = solve_head(g, y)
        alpha_o, beta_o = normal_equations_fit(g, y)
        scale = max(1.0, float(np.max(np.abs(alpha_o))))
        assert np.max(np.abs(sol.alpha - alpha_o)) <= 1e-8 * scale
        assert abs(sol.beta - beta_o) <= 1e-8 * max(1.0, abs(beta_o))


def test_solve_head_residual_orthogonality():
    rng = stream(2, "head-orth")
    g = rng.standard_normal((50, 8))
    y = rng.standard_normal(50)
    sol = solve_head(g, y)
    centered = g - g.mean(axis=0, keepdims=True)
    r = sol.residual
    for j in range(8):
        c = centered[:, j]
        assert abs(r @ c) <= 1e-8 * max(1.0, np.linalg.norm(r) * np.linalg.norm(c))
    assert abs(r.sum()) <= 1e-8 * max(1.0, np.linalg.norm(r) * np.sqrt(50))


def test_solve_head_validation():
    with pytest.raises(ValueError):
        solve_head([[1.0]], [1.0])
    with pytest.raises(ValueError):
        solve_head([[1.0], [2.0]], [1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# polynomial bound

def test_polynomial_rank_bound_values():
    assert polynomial_rank_bound(2, 2) == 6
    assert polynomial_rank_bound(9, 1) == 10
    assert polynomial_rank_bound(1, 0) == 1
    assert polynomial_rank_bound(9, 2) == 55
    with pytest.raises(OverflowError):
        polynomial_rank_bound(200, 100)
    with pytest.raises(ValueError):
        polynomial_rank_bound(0, 1)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("d", [2, 3])
def test_monomial_random_features_respect_ceiling(p, d):
    bound = polynomial_rank_bound(d, p)
    for trial in range(3):
        rng = stream(trial, "ceiling", d, p)
        x = rng.standard_normal((200, d))
        report = rank_experiment("random", x, 4 * bound, monomial(p), seed=trial, poly_degree=p)
        assert report.achieved_rank <= bound
        assert report.theoretical_bound == bound


# ---------------------------------------------------------------------------
# rank-one smooth construction

def test_rank1_reaches_target_rank_with_seagull():
    x = stream(3, "rank1").uniform(-2, 2, (100, 9))
    built = construct_rank1_weights(x, 20, SEA, seed=3)
    assert built.achieved_rank == 20
    assert built.succeeded
    # the returned weights must reproduce the rank when applied directly
    g = SEA.evaluate(x @ built.w_matrix + built.bias_row)
    assert numerical_rank(g) == 20


def test_rank1_m_equals_one():
    for name in ("seagull", "tanh"):
        x = stream(4, "rank1-one", name).uniform(-2, 2, (30, 5))
        built = construct_rank1_weights(x, 1, catalog_get(name), seed=4)
        assert built.achieved_rank == 1


def test_rank1_with_monomial_stays_under_polynomial_bound():
    x = stream(5, "rank1-poly").uniform(-2, 2, (100, 9))
    built = construct_rank1_weights(x, 20, monomial(2), seed=5)
    assert built.achieved_rank <= polynomial_rank_bound(9, 2) == 55
    x2 = stream(5, "rank1-poly2").uniform(-2, 2, (100, 2))
    built2 = construct_rank1_weights(x2, 20, monomial(2), seed=5)
    assert built2.achieved_rank <= polynomial_rank_bound(2, 2) == 6


def test_seagull_escapes_d2_polynomial_ceiling():
    # m twice the quadratic bound C(4,2)=6; a quadratic could never reach it
    x = stream(6, "escape").uniform(-2, 2, (200, 2))
    built = construct_rank1_weights(x, 12, SEA, seed=6)
    assert built.achieved_rank == 12 > polynomial_rank_bound(2, 2)


def test_rank1_duplicate_rows_fail_distinctness():
    x = np.ones((10, 3))
    with pytest.raises(ConstructionError):
        construct_rank1_weights(x, 3, SEA, seed=0)


# ---------------------------------------------------------------------------
# relu staircase

def test_staircase_small_case():
    x = stream(7, "stair").uniform(-2, 2, (5, 1))
    w_mat, b_row = construct_relu_staircase(x, 3, seed=7)
    g = RELU.evaluate(x @ w_mat + b_row)
    assert numerical_rank(g) == 3


def test_staircase_triangular_pattern():
    x = stream(8, "stair-pattern").uniform(-2, 2, (8, 4))
    m = 5
    w_mat, b_row = construct_relu_staircase(x, m, seed=8)
    g = RELU.evaluate(x @ w_mat + b_row)
    order = np.argsort(x @ w_mat[:, 0])[::-1]
    g_sorted = g[order]
    for k in range(m):
        column = g_sorted[:, k]
        assert np.all(column[: k + 1] > 0)
        assert np.all(column[k + 1 :] == 0)


def test_staircase_full_rank_when_m_equals_n():
    x = stream(9, "stair-full").uniform(-2, 2, (12, 3))
    w_mat, b_row = construct_relu_staircase(x, 12, seed=9)
    assert numerical_rank(RELU.evaluate(x @ w_mat + b_row)) == 12


@pytest.mark.parametrize("n", [10, 50, 200])
def test_staircase_rank_exact_for_every_m(n):
    x = stream(10, "stair-sweep", n).uniform(-2, 2, (n, 6))
    for m in range(1, n + 1):
        w_mat, b_row = construct_relu_staircase(x, m, seed=10)
        assert numerical_rank(RELU.evaluate(x @ w_mat + b_row)) == m


# ---------------------------------------------------------------------------
# exchangeability diagnostics

def test_check_exchangeability_on_exchangeable_target():
    report = check_exchangeability(triangle_area, k=3, d=9, n_samples=200, seed=11)
    assert report.swap_gap <= 1e-12
    assert report.antisym_gap <= 1e-12


def test_check_exchangeability_on_networks():
    even_net = init_network(mlp_specs([9, 50, 50, 1], SEA, first_layer_bias=False), seed=12)
    report = check_exchangeability(predict_fn(even_net), k=4, d=9, n_samples=100, seed=12)
    assert report.antisym_gap <= 1e-12

    relu_net = init_network(mlp_specs([9, 50, 50, 1], RELU, first_layer_bias=False), seed=12)
    report_relu = check_exchangeability(predict_fn(relu_net), k=4, d=9, n_samples=100, seed=12)
    assert report_relu.antisym_gap > 1e-6


def test_check_exchangeability_validation():
    with pytest.raises(ValueError):
        check_exchangeability(triangle_area, k=5, d=9)


# ---------------------------------------------------------------------------
# invariance counting

def _sphere_sampler(task):
    def sample(n, rng):
        return generate_dataset(task, n, int(rng.integers(2**32))).x

    return sample


def test_count_on_synthetic_functions():
    cands = nine_dim_candidates()
    total = lambda x: np.asarray(x).sum(axis=-1)
    assert count_invariant_permutations(total, cands, seed=0) == 12
    first = lambda x: np.asarray(x)[..., 0]
    expected = sum(1 for c in cands if c[0] == 0)
    assert count_invariant_permutations(first, cands, seed=0) == expected
    with pytest.raises(ValueError):
        count_invariant_permutations(total, [], seed=0)


def test_counts_over_declared_universes():
    """Truthful invariance counts for every task, verified by evaluation.

    Note the solid-angle pair: simultaneous coordinate permutations are
    isometries of the sphere and |det|/dot-products are blind to them, so
    the full 12-candidate universe leaves solid_angle invariant (count 12,
    not 6) and psi keeps 4 invariances (both identities, the u<->v block
    swap, and the first<->second coordinate swap), not 2. The vertex-block
    family alone yields the 6/2 split.
    """
    cands = nine_dim_candidates()
    tri = get_task("triangle")
    assert count_invariant_permutations(tri.label_fn, cands, seed=1) == 12

    phi = get_task("solid_angle")
    phi_sample = _sphere_sampler(phi)
    assert count_invariant_permutations(phi.label_fn, cands, seed=1, sample_fn=phi_sample) == 12
    psi = get_task("psi")
    psi_sample = _sphere_sampler(psi)
    assert count_invariant_permutations(psi.label_fn, cands, seed=1, sample_fn=psi_sample) == 4

    blocks = vertex_block_perms(3, 3)
    coords = coordinate_perms(3, 3)
    assert count_invariant_permutations(phi.label_fn, blocks, seed=1, sample_fn=phi_sample) == 6
    assert count_invariant_permutations(phi.label_fn, coords, seed=1, sample_fn=phi_sample) == 6
    assert count_invariant_permutations(psi.label_fn, blocks, seed=1, sample_fn=psi_sample) == 2
    assert count_invariant_permutations(psi.label_fn, coords, seed=1, sample_fn=psi_sample) == 2

    cos_task = get_task("det3_cos")
    assert count_invariant_permutations(cos_task.label_fn, cands, seed=1) == 12
    sin_task = get_task("det3_sin")
    assert count_invariant_permutations(sin_task.label_fn, cands, seed=1) == 6

    simplex = get_task("simplex5")
    swaps = pair_swap_candidates(5, 5)
    assert count_invariant_permutations(simplex.label_fn, swaps, seed=1) == 10


def test_task_metadata_counts_match_measured():
    for name in ("triangle", "det3_cos", "det3_sin", "solid_angle", "psi", "simplex5"):
        task = get_task(name)
        sample_fn = _sphere_sampler(task) if task.sampler == "sphere_triples" else None
        measured = count_invariant_permutations(
            task.label_fn, task.candidate_perms(), seed=2, sample_fn=sample_fn
        )
        assert measured == task.invariant_permutation_count


# ---------------------------------------------------------------------------
# rank_experiment plumbing

def test_rank_experiment_reports():
    x = stream(13, "rexp").uniform(-2, 2, (50, 3))
    report = rank_experiment("relu_staircase", x, 10, seed=13)
    assert report.construction == "relu_staircase"
    assert report.achieved_rank == 10
    assert report.to_dict()["n"] == 50
    with pytest.raises(ValueError):
        rank_experiment("mystery", x, 5, SEA)
    with pytest.raises(ValueError):
        rank_experiment("random", x, 5)
