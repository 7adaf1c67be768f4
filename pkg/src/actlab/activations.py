"""Scalar activation catalog with analytic derivatives and declared traits.

Each entry is an :class:`ActivationSpec`: a vectorized evaluate/derivative
pair plus the properties the experiments key on (evenness, smoothness class,
growth class). The catalog covers the five common baselines (relu, elu,
sigmoid, tanh, softplus), the even logarithmic-growth ``seagull``
``log(1+x^2)``, the odd ``llu`` ``sign(x)*log(1+|x|)``, and the
``g1``/``g2``/``g3`` family parameterized by ``alpha`` in [1, 2]:

    g1(x) = log(1 + |x|^alpha)                  (even; g1|alpha=2 == seagull)
    g2(x) = sign(x) * log(1 + |x|^alpha)        (odd;  g2|alpha=1 == llu)
    g3(x) = log(1 + x^alpha) for x > 0 else 0   (one-sided)

Conventions at non-differentiable points: relu'(0) = 0, g3'(<=0) = 0, and
the kink of g1/llu at 0 reports the symmetric value (0 for even functions,
the shared one-sided slope for odd ones). Functions map arrays to arrays
elementwise and accept scalars.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# smoothness classes
C0 = "C0"
C1 = "C1"
C_INFINITY = "C_infinity"
PIECEWISE = "piecewise"

# growth classes
BOUNDED = "bounded"
LOGARITHMIC = "logarithmic"
LINEAR = "linear"

CATALOG_NAMES = ("relu", "elu", "sigmoid", "tanh", "softplus", "seagull", "llu", "g1", "g2", "g3")
_FAMILY_NAMES = ("g1", "g2", "g3")


@dataclass(frozen=True)
class ActivationSpec:
    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    is_even: bool
    smoothness: str
    growth: str
    alpha: float | None = None

    @property
    def key(self) -> str:
        """Stable identifier including the family parameter, for configs."""
        return self.name if self.alpha is None else f"{self.name}({self.alpha:g})"


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_d(x):
    return (np.asarray(x, dtype=np.float64) > 0.0).astype(np.float64)


def _elu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_d(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def _sigmoid(x):
    # clip keeps exp() in range; sigmoid saturates exactly past +-40 anyway
    z = np.clip(np.asarray(x, dtype=np.float64), -40.0, 40.0)
    return 1.0 / (1.0 + np.exp(-z))


def _sigmoid_d(x):
    s = _sigmoid(x)
    return s * (1.0 - s)


def _tanh_d(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def _seagull(x):
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(x * x)


def _seagull_d(x):
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * x / (1.0 + x * x)


def _llu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.log1p(np.abs(x))


def _llu_d(x):
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (1.0 + np.abs(x))


def _g1(alpha):
    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return np.log1p(np.abs(x) ** alpha)

    def d(x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        return alpha * ax ** (alpha - 1.0) * np.sign(x) / (1.0 + ax**alpha)

    return f, d


def _g2(alpha):
    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return np.sign(x) * np.log1p(np.abs(x) ** alpha)

    def d(x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        return alpha * ax ** (alpha - 1.0) / (1.0 + ax**alpha)

    return f, d


def _g3(alpha):
    def f(x):
        x = np.asarray(x, dtype=np.float64)
        xp = np.maximum(x, 0.0)
        return np.where(x > 0.0, np.log1p(xp**alpha), 0.0)

    def d(x):
        x = np.asarray(x, dtype=np.float64)
        xp = np.maximum(x, 0.0)
        return np.where(x > 0.0, alpha * xp ** (alpha - 1.0) / (1.0 + xp**alpha), 0.0)

    return f, d


def _family_smoothness(name: str, alpha: float) -> str:
    if name == "g1":
        return C_INFINITY if alpha == 2.0 else (C0 if alpha == 1.0 else C1)
    if name == "g2":
        return C1
    # g3 has a slope jump at 0 exactly when alpha == 1
    return C0 if alpha == 1.0 else C1


def catalog_get(name: str, alpha: float | None = None) -> ActivationSpec:
    """Look up an activation by its stable identifier.

    ``alpha`` is required (in [1, 2]) for g1/g2/g3 and rejected elsewhere.
    """
    if name not in CATALOG_NAMES:
        raise ValueError(f"unknown activation {name!r}; choose from {', '.join(CATALOG_NAMES)}")
    if name in _FAMILY_NAMES:
        if alpha is None:
            raise ValueError(f"{name} requires alpha in [1, 2]")
        alpha = float(alpha)
        if not 1.0 <= alpha <= 2.0:
            raise ValueError(f"alpha must be in [1, 2], got {alpha}")
    elif alpha is not None:
        raise ValueError(f"alpha only applies to {', '.join(_FAMILY_NAMES)}, not {name}")

    if name == "relu":
        return ActivationSpec("relu", _relu, _relu_d, False, PIECEWISE, LINEAR)
    if name == "elu":
        return ActivationSpec("elu", _elu, _elu_d, False, C1, LINEAR)
    if name == "sigmoid":
        return ActivationSpec("sigmoid", _sigmoid, _sigmoid_d, False, C_INFINITY, BOUNDED)
    if name == "tanh":
        return ActivationSpec("tanh", np.tanh, _tanh_d, False, C_INFINITY, BOUNDED)
    if name == "softplus":
        return ActivationSpec("softplus", _softplus, _sigmoid, False, C_INFINITY, LINEAR)
    if name == "seagull":
        return ActivationSpec("seagull", _seagull, _seagull_d, True, C_INFINITY, LOGARITHMIC)
    if name == "llu":
        return ActivationSpec("llu", _llu, _llu_d, False, C1, LOGARITHMIC)
    if name == "g1":
        f, d = _g1(alpha)
        return ActivationSpec("g1", f, d, True, _family_smoothness("g1", alpha), LOGARITHMIC, alpha)
    if name == "g2":
        f, d = _g2(alpha)
        return ActivationSpec("g2", f, d, False, _family_smoothness("g2", alpha), LOGARITHMIC, alpha)
    f, d = _g3(alpha)
    return ActivationSpec("g3", f, d, False, _family_smoothness("g3", alpha), LOGARITHMIC, alpha)


IDENTITY = ActivationSpec("identity", lambda x: np.asarray(x, dtype=np.float64), lambda x: np.ones_like(np.asarray(x, dtype=np.float64)), False, C_INFINITY, LINEAR)


def monomial(p: int) -> ActivationSpec:
    """t^p as an ActivationSpec — the rank-limited reference nonlinearity.

    Not part of the catalog (it is the counterexample the rank experiments
    are run against, not a usable network activation).
    """
    if p < 0:
        raise ValueError(f"monomial degree must be >= 0, got {p}")

    def f(x):
        return np.asarray(x, dtype=np.float64) ** p

    def d(x):
        x = np.asarray(x, dtype=np.float64)
        return float(p) * x ** (p - 1) if p > 0 else np.zeros_like(x)

    return ActivationSpec(f"pow{p}", f, d, p % 2 == 0, C_INFINITY, LINEAR)


def resolve(name: str, alpha: float | None = None) -> ActivationSpec:
    """catalog_get plus the identity, for deserializing network specs."""
    if name == "identity":
        return IDENTITY
    if name.startswith("pow") and name[3:].isdigit():
        return monomial(int(name[3:]))
    return catalog_get(name, alpha)


def apply_elementwise(spec: ActivationSpec, m) -> np.ndarray:
    """Entry-wise spec.evaluate over a finite array; shape preserved."""
    m = np.asarray(m, dtype=np.float64)
    if not np.isfinite(m).all():
        raise ValueError("activation input must be finite")
    return np.asarray(spec.evaluate(m), dtype=np.float64)


def derivative_elementwise(spec: ActivationSpec, m) -> np.ndarray:
    """Entry-wise spec.derivative over a finite array; shape preserved."""
    m = np.asarray(m, dtype=np.float64)
    if not np.isfinite(m).all():
        raise ValueError("activation input must be finite")
    return np.asarray(spec.derivative(m), dtype=np.float64)
