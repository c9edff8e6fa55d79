"""Full-sample comparison estimator and its sandwich variance.

The penalized full-sample fit goes through the same quadratic machinery as
the subbagging path: one Newton fit on all rows gives ``(beta, Hessian)``,
whose expansion is an m=1 aggregate with ``k = N``. BIC is then SBIC with
the scale ``k`` replaced by ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aggregate import AggregatedQuadratic, adaptive_weights, single_summary_quadratic
from .errors import NonIdentifiableError
from .losses import Family, hessian_weights, observation_gradients, symmetrize
from .solver import N_GRID, LambdaPath, solve_path
from .subsample import NEWTON_MAX_ITER, NEWTON_TOL, newton_fit

CHUNK_ROWS = 65536


@dataclass(frozen=True)
class FullFit:
    beta: np.ndarray
    hessian: np.ndarray
    loss: float
    N: int

    def quadratic(self) -> AggregatedQuadratic:
        return single_summary_quadratic(self.beta, self.hessian, self.loss, k=self.N)


@dataclass(frozen=True)
class SandwichVariance:
    sigma_hat: np.ndarray
    v_hat: np.ndarray
    psi_n: np.ndarray
    restrict: tuple[int, ...]
    N: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.psi_n) / self.N)


def fit_full(data, family: Family, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
             chunk_rows: int | None = None) -> FullFit:
    """Newton fit on all rows, one streaming pass per evaluation."""
    beta, value, H = newton_fit(family, tol=tol, max_iter=max_iter,
                                chunks=lambda: data.chunks(chunk_rows))
    return FullFit(beta=beta, hessian=H, loss=value, N=data.n_rows)


def adaptive_lasso_full(data, family: Family, gamma: float = 1.0, n_grid: int = N_GRID,
                        fit: FullFit | None = None, unpenalized: Sequence[int] = ()) -> LambdaPath:
    fit = fit_full(data, family) if fit is None else fit
    agg = fit.quadratic()
    w = adaptive_weights(fit.beta, gamma, unpenalized)
    return solve_path(agg, w, k=fit.N, N=fit.N, n_grid=n_grid)


def sandwich_variance(data, family: Family, beta_hat, restrict: Sequence[int],
                      chunk_rows: int | None = None) -> SandwichVariance:
    """``V^-1 Sigma V^-1`` restricted to ``restrict``, accumulated in one pass."""
    beta = np.asarray(beta_hat, dtype=float)
    p = len(beta)
    n = 0
    g_sum = np.zeros(p)
    gg_sum = np.zeros((p, p))
    v_sum = np.zeros((p, p))
    for X, y in data.chunks(chunk_rows):
        G = observation_gradients(family, beta, X, y)
        g_sum += G.sum(axis=0)
        gg_sum += G.T @ G
        v_sum += (X.T * hessian_weights(family, beta, X)) @ X
        n += len(y)
    g_bar = g_sum / n
    sigma = symmetrize(gg_sum / n - np.outer(g_bar, g_bar))
    v = symmetrize(v_sum / n)
    try:
        np.linalg.cholesky(v)
        v_inv = np.linalg.inv(v)
    except np.linalg.LinAlgError:
        raise NonIdentifiableError("average Hessian is singular") from None
    full = v_inv @ sigma @ v_inv
    idx = np.asarray(restrict, dtype=np.int64)
    psi = symmetrize(full[np.ix_(idx, idx)])
    return SandwichVariance(sigma_hat=sigma, v_hat=v, psi_n=psi,
                            restrict=tuple(int(j) for j in idx), N=n)
