"""Dense float64 matrix helpers: products, SVD, pseudoinverse, numerical rank.

A "matrix" throughout the package is a plain 2-D C-order numpy array of
float64. :func:`as_matrix` is the single entry gate: it rejects NaN/Inf and
wrong dimensionality so every routine below may assume finite input. All
functions treat their arguments as immutable values and return fresh arrays.
The decompositions are backed by LAPACK via numpy; the accuracy contract
(reconstruction and Penrose identities, see the test suite) is what the rest
of the package relies on, not the specific algorithm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = float(np.finfo(np.float64).eps)


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""

    def __init__(self, op: str, left: tuple, right: tuple):
        self.left_shape = tuple(left)
        self.right_shape = tuple(right)
        super().__init__(f"{op}: incompatible shapes {self.left_shape} and {self.right_shape}")


class SvdConvergenceError(ArithmeticError):
    """The iterative SVD scheme failed to converge."""


def as_matrix(data) -> np.ndarray:
    """Validate and convert to a 2-D float64 array; rejects NaN/Inf."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"empty matrix of shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    return np.ascontiguousarray(m)


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    return a @ b


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD: u @ diag(singular_values) @ vt reconstructs the input.

    u has orthonormal columns, vt orthonormal rows, singular_values is
    non-increasing and non-negative.
    """

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.vt


def svd(m) -> SvdResult:
    """Thin singular value decomposition of a finite matrix."""
    m = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD failed to converge: {exc}") from exc
    return SvdResult(u=u, singular_values=s, vt=vt)


def pinv(m, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``rcond * sigma_max`` are treated as zero.
    """
    if rcond < 0:
        raise ValueError(f"rcond must be >= 0, got {rcond}")
    res = svd(m)
    s = res.singular_values
    cutoff = rcond * (s[0] if s.size else 0.0)
    inv_s = np.where(s > cutoff, np.divide(1.0, s, out=np.zeros_like(s), where=s > 0), 0.0)
    return (res.vt.T * inv_s) @ res.u.T


def numerical_rank(m, tol_factor: float = 1.0) -> int:
    """Count of singular values strictly above the rank tolerance.

    The tolerance is ``tol_factor * max(rows, cols) * eps * sigma_max``,
    the standard dense-matrix choice.
    """
    if tol_factor <= 0:
        raise ValueError(f"tol_factor must be > 0, got {tol_factor}")
    m = as_matrix(m)
    s = svd(m).singular_values
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = tol_factor * max(m.shape) * EPS * s[0]
    return int(np.count_nonzero(s > tol))


def column_means(m) -> np.ndarray:
    """Per-column means as a 1 x cols row vector (broadcastable against m)."""
    m = as_matrix(m)
    return m.mean(axis=0, keepdims=True)


def save_matrix_csv(m, path) -> None:
    """Write one row per line, entries as shortest decimal that round-trips."""
    m = as_matrix(m)
    with open(path, "w", encoding="ascii") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        rows = [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"no rows in {path}")
    return as_matrix(rows)
