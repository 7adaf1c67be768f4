import numpy as np
import pytest

from actlab.linalg import (
    ShapeMismatchError,
    as_matrix,
    column_means,
    load_matrix_csv,
    matmul,
    numerical_rank,
    pinv,
    save_matrix_csv,
    svd,
)
from actlab.rng import stream


def naive_matmul(a, b):
    """Triple-loop oracle."""
    n, k, m = len(a), len(a[0]), len(b[0])
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            for t in range(k):
                out[i, j] += a[i][t] * b[t][j]
    return out


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        as_matrix([1.0, 2.0])
    with pytest.raises(ValueError):
        as_matrix([[np.nan, 1.0]])
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])
    with pytest.raises(ValueError):
        as_matrix(np.zeros((0, 3)))


def test_matmul_identity():
    m = [[1.0, 2.0], [3.0, 4.0]]
    assert np.array_equal(matmul(np.eye(2), m), np.array(m))


def test_matmul_hand_dot():
    assert np.array_equal(matmul([[1.0, 2.0]], [[3.0], [4.0]]), [[11.0]])


def test_matmul_matches_triple_loop_oracle():
    rng = stream(1, "matmul")
    a = rng.standard_normal((5, 3))
    b = rng.standard_normal((3, 7))
    assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) <= 1e-12


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeMismatchError) as exc:
        matmul(np.ones((2, 3)), np.ones((4, 2)))
    assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)
    assert exc.value.left_shape == (2, 3)
    assert exc.value.right_shape == (4, 2)


def test_svd_diagonal():
    res = svd(np.diag([3.0, 1.0]))
    assert res.singular_values == pytest.approx([3.0, 1.0])


def test_svd_zero_matrix():
    res = svd(np.zeros((3, 2)))
    assert res.singular_values == pytest.approx([0.0, 0.0])


def test_svd_orthonormality_and_reconstruction():
    rng = stream(2, "svd")
    m = rng.standard_normal((6, 4))
    res = svd(m)
    assert np.max(np.abs(res.u.T @ res.u - np.eye(4))) < 1e-10
    assert np.max(np.abs(res.vt @ res.vt.T - np.eye(4))) < 1e-10
    fro = np.linalg.norm(m)
    assert np.linalg.norm(res.reconstruct() - m) <= 1e-10 * max(1.0, fro)
    s = res.singular_values
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)


def test_pinv_identity():
    assert pinv(np.eye(3)) == pytest.approx(np.eye(3))


def test_pinv_diagonal_inverts_nonzero_singular_values():
    assert pinv(np.diag([2.0, 0.0])) == pytest.approx(np.diag([0.5, 0.0]))


def test_pinv_left_inverse_for_full_column_rank():
    rng = stream(3, "pinv")
    m = rng.standard_normal((8, 3))
    assert np.max(np.abs(pinv(m) @ m - np.eye(3))) < 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_pinv_penrose_identities(seed):
    rng = stream(seed, "penrose")
    shapes = [(5, 5), (12, 7), (7, 12), (64, 64), (40, 9)]
    for rows, cols in shapes:
        m = rng.standard_normal((rows, cols))
        if seed == 1:  # include rank-deficient cases
            r = max(1, min(rows, cols) // 2)
            m = rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))
        p = pinv(m)
        scale = max(1.0, np.linalg.norm(m))
        assert np.linalg.norm(m @ p @ m - m) <= 1e-8 * scale
        assert np.linalg.norm(p @ m @ p - p) <= 1e-8 * max(1.0, np.linalg.norm(p))
        mp = m @ p
        pm = p @ m
        assert np.linalg.norm(mp - mp.T) <= 1e-8 * max(1.0, np.linalg.norm(mp))
        assert np.linalg.norm(pm - pm.T) <= 1e-8 * max(1.0, np.linalg.norm(pm))


def test_numerical_rank_basics():
    assert numerical_rank(np.eye(4)) == 4
    assert numerical_rank(np.ones((10, 6))) == 1
    rng = stream(4, "rank")
    x = rng.standard_normal((20, 3))
    w = rng.standard_normal((3, 15))
    assert numerical_rank(x @ w) <= 3
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_numerical_rank_invariances():
    rng = stream(5, "rank-invariance")
    m = rng.standard_normal((12, 5)) @ rng.standard_normal((5, 9))
    base = numerical_rank(m)
    perm = rng.permutation(12)
    assert numerical_rank(m[perm]) == base
    q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    assert numerical_rank(q @ m) == base


def test_numerical_rank_product_bound():
    rng = stream(6, "rank-product")
    for _ in range(5):
        a = rng.standard_normal((10, 4)) @ rng.standard_normal((4, 8))
        b = rng.standard_normal((8, 3)) @ rng.standard_normal((3, 6))
        assert numerical_rank(a @ b) <= min(numerical_rank(a), numerical_rank(b))


def test_column_means():
    assert np.array_equal(column_means([[1.0, 3.0], [3.0, 5.0]]), [[2.0, 4.0]])
    assert np.array_equal(column_means([[7.0, 8.0]]), [[7.0, 8.0]])
    assert np.array_equal(column_means([[4.0]] * 5), [[4.0]])
    assert column_means(np.ones((3, 2))).shape == (1, 2)


def test_matrix_csv_round_trip_is_bitwise(tmp_path):
    rng = stream(7, "csv")
    m = rng.standard_normal((4, 3)) * np.array([1e-200, 1.0, 1e200])
    m[0, 0] = 1.0 / 3.0
    m[1, 1] = -0.0
    path = tmp_path / "m.csv"
    save_matrix_csv(m, path)
    again = load_matrix_csv(path)
    assert again.shape == m.shape
    assert np.array_equal(again, m)
    # -0.0 must survive with its sign bit
    assert np.signbit(again[1, 1])
