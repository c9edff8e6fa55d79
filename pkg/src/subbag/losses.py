"""Per-observation losses for the linear and logistic families.

The linear loss is the plain squared error ``(y - x'b)**2`` with no 1/2
factor, so its Hessian is ``2 x x'``. The logistic loss is the negative
log-likelihood of a Bernoulli response.

Two layers are exposed: scalar functions on a single :class:`Observation`
(validated, used in tests and diagnostics) and batch functions on a design
matrix that return sample *means* (unvalidated, used on the hot path).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DataError


class Family(enum.Enum):
    LINEAR = 0
    LOGISTIC = 1

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, Family):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown family {value!r}") from None


@dataclass(frozen=True)
class Observation:
    y: float
    x: np.ndarray


def sigmoid(t):
    """Logistic function, overflow-free for any finite ``t``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check(family: Family, beta, z: Observation) -> tuple[np.ndarray, float, np.ndarray]:
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(z.x, dtype=float)
    if beta.ndim != 1 or x.shape != beta.shape:
        raise DataError(f"dimension mismatch: beta {beta.shape}, x {x.shape}")
    y = float(z.y)
    if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(x)) and np.isfinite(y)):
        raise DataError("non-finite input")
    if family is Family.LOGISTIC and y not in (0.0, 1.0):
        raise DataError(f"logistic response must be 0 or 1, got {y}")
    return beta, y, x


def _logistic_terms(t, y):
    # log(1 + exp(t)) - y t, written so exp never overflows
    return np.log1p(np.exp(-np.abs(t))) + np.maximum(t, 0.0) - y * t


def loss(family: Family, beta, z: Observation) -> float:
    beta, y, x = _check(family, beta, z)
    t = float(x @ beta)
    if family is Family.LINEAR:
        return (y - t) ** 2
    return float(_logistic_terms(t, y))


def gradient(family: Family, beta, z: Observation) -> np.ndarray:
    beta, y, x = _check(family, beta, z)
    t = float(x @ beta)
    if family is Family.LINEAR:
        return -2.0 * (y - t) * x
    return (float(sigmoid(t)) - y) * x


def hessian(family: Family, beta, z: Observation) -> np.ndarray:
    beta, y, x = _check(family, beta, z)
    if family is Family.LINEAR:
        w = 2.0
    else:
        s = float(sigmoid(x @ beta))
        w = s * (1.0 - s)
    return w * np.outer(x, x)


# batch layer: X is (n, p), y is (n,); all functions return means over rows


def batch_loss(family: Family, beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    t = X @ beta
    if family is Family.LINEAR:
        r = y - t
        return float(r @ r) / len(y)
    return float(np.mean(_logistic_terms(t, y)))


def batch_derivatives(family: Family, beta: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Return ``(mean loss, mean gradient, mean Hessian)`` over the rows."""
    n = len(y)
    t = X @ beta
    if family is Family.LINEAR:
        r = y - t
        value = float(r @ r) / n
        grad = -2.0 * (X.T @ r) / n
        H = 2.0 * (X.T @ X) / n
    else:
        value = float(np.mean(_logistic_terms(t, y)))
        s = sigmoid(t)
        grad = X.T @ (s - y) / n
        H = (X.T * (s * (1.0 - s))) @ X / n
    return value, grad, symmetrize(H)


def observation_gradients(family: Family, beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise gradients, shape (n, p)."""
    t = X @ beta
    if family is Family.LINEAR:
        return (-2.0 * (y - t))[:, None] * X
    return (sigmoid(t) - y)[:, None] * X


def hessian_weights(family: Family, beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Scalar weights ``w_i`` such that the row Hessian is ``w_i x_i x_i'``."""
    if family is Family.LINEAR:
        return np.full(X.shape[0], 2.0)
    s = sigmoid(X @ beta)
    return s * (1.0 - s)


def symmetrize(H: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle so the result is symmetric bit-for-bit."""
    upper = np.triu(H)
    return upper + np.triu(H, 1).T
