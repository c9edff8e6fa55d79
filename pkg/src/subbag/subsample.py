"""Subsample drawing and per-subsample Newton fits.

Each subsample is reduced to a :class:`SubsampleSummary` (minimizer,
Hessian at the minimizer, loss at the minimizer); the rows themselves are
discarded as soon as the fit returns.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, NonIdentifiableError, SubsampleError
from .losses import Family, batch_derivatives, batch_loss, sigmoid, symmetrize

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
MAX_HALVINGS = 30


@dataclass(frozen=True)
class SubbaggingPlan:
    N: int
    k: int
    m: int
    master_seed: int = 0
    delta: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if not (1 <= self.k <= self.N):
            raise ConfigError(f"need 1 <= k <= N, got k={self.k}, N={self.N}")
        if self.m < 1:
            raise ConfigError(f"need m >= 1, got m={self.m}")

    @classmethod
    def from_rates(cls, N: int, delta: float, alpha: float, master_seed: int = 0) -> "SubbaggingPlan":
        """``k = floor(N**(1/2 + delta))`` and ``m = floor(alpha * N / k)``."""
        if not 0 < delta < 0.5:
            raise ConfigError(f"delta must lie in (0, 1/2), got {delta}")
        if alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {alpha}")
        k = _floor_power(N, 0.5 + delta)
        m = math.floor(alpha * N / k)
        if m < 1:
            raise ConfigError(f"alpha={alpha} gives m_N=0 subsamples for N={N}, k={k}")
        return cls(N=N, k=k, m=m, master_seed=master_seed, delta=delta, alpha=alpha)

    @property
    def inflation(self) -> float:
        return 1.0 + self.N / (self.k * self.m)


def _floor_power(N: int, e: float) -> int:
    k = math.floor(N ** e)
    # guard against pow rounding just below an exact integer power
    if (k + 1) ** (1 / e) <= N * (1 + 1e-15):
        k += 1
    return min(k, N)


@dataclass(frozen=True)
class SubsampleSummary:
    k: int
    beta_tilde: np.ndarray
    hessian: np.ndarray
    loss_at_opt: float
    subsample_id: int
    seed: int

    @property
    def p(self) -> int:
        return len(self.beta_tilde)


def subsample_seed(master_seed: int, subsample_id: int) -> int:
    """Independent 64-bit seed for one subsample (counter-based split)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(subsample_id,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_subsample(N: int, k: int, seed: int) -> np.ndarray:
    """``k`` distinct indices from ``range(N)``, uniform over k-subsets.

    Partial Fisher-Yates over a virtual identity permutation; only swapped
    positions are stored, so memory is O(k). Returned sorted.
    """
    if not 1 <= k <= N:
        raise ConfigError(f"need 1 <= k <= N, got k={k}, N={N}")
    rng = np.random.default_rng(seed)
    jumps = rng.integers(np.arange(k), N).tolist()
    swapped: dict[int, int] = {}
    out = [0] * k
    for i, j in enumerate(jumps):
        vj = swapped.get(j, j)
        swapped[j] = swapped.get(i, i)
        out[i] = vj
    idx = np.array(out, dtype=np.int64)
    idx.sort()
    return idx


PIVOT_TOL = 1e-12


def _scaled_cholesky(H: np.ndarray):
    """Cholesky factor of the unit-diagonal rescaling of ``H`` plus the scaling.

    Rejects Hessians whose rescaled form has a pivot below ``PIVOT_TOL``
    (rank deficient up to rounding), independently of covariate units.
    """
    d = np.diag(H)
    if not np.all(d > 0):
        raise NonIdentifiableError("non-identifiable subsample: Hessian has a zero diagonal entry")
    s = 1.0 / np.sqrt(d)
    C = H * s[:, None] * s[None, :]
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise NonIdentifiableError("non-identifiable subsample: Hessian is not positive definite") from None
    if np.min(np.diag(L)) ** 2 < PIVOT_TOL:
        raise NonIdentifiableError("non-identifiable subsample: Hessian is numerically singular")
    return L, s


def _cholesky(H: np.ndarray) -> None:
    _scaled_cholesky(H)


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    L, s = _scaled_cholesky(H)
    return s * np.linalg.solve(L.T, np.linalg.solve(L, s * g))


def _check_separation(family: Family, beta: np.ndarray, chunks) -> None:
    if family is not Family.LOGISTIC:
        return
    # every residual below 1/2 means beta classifies all rows correctly
    worst = 0.0
    for X, y in chunks():
        worst = max(worst, float(np.max(np.abs(sigmoid(X @ beta) - y), initial=0.0)))
    if worst < 0.5:
        raise ConvergenceError("complete separation: fitted probabilities reproduce the "
                               "response exactly, the minimizer does not exist", 0.0)


def _derivatives(family: Family, beta: np.ndarray, chunks):
    parts = [(len(y), *batch_derivatives(family, beta, X, y)) for X, y in chunks()]
    if len(parts) == 1:
        return parts[0][1:]
    n = sum(c[0] for c in parts)
    value = sum(c[0] * c[1] for c in parts) / n
    g = sum(c[0] * c[2] for c in parts) / n
    H = symmetrize(sum(c[0] * c[3] for c in parts) / n)
    return value, g, H


def _loss(family: Family, beta: np.ndarray, chunks) -> float:
    parts = [(len(y), batch_loss(family, beta, X, y)) for X, y in chunks()]
    if len(parts) == 1:
        return parts[0][1]
    return sum(n * v for n, v in parts) / sum(n for n, _ in parts)


def newton_fit(family: Family, X: np.ndarray | None = None, y: np.ndarray | None = None,
               init=None, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
               chunks=None):
    """Damped Newton on the mean loss of ``(X, y)``.

    Instead of arrays, ``chunks`` may be a zero-argument callable yielding
    ``(X, y)`` blocks; each iteration then makes one streaming pass.
    Returns ``(beta, mean loss, mean Hessian)`` at the final iterate, which
    satisfies ``max|grad| <= tol``.
    """
    if chunks is None:
        chunks = lambda: ((X, y),)  # noqa: E731
    beta = None if init is None else np.array(init, dtype=float)
    if beta is None:
        for X0, _ in chunks():
            beta = np.zeros(X0.shape[1])
            break
    value, g, H = _derivatives(family, beta, chunks)
    for _ in range(max_iter):
        if np.max(np.abs(g), initial=0.0) <= tol:
            _cholesky(H)
            _check_separation(family, beta, chunks)
            return beta, value, H
        step = _newton_direction(H, g)
        t = 1.0
        slack = 1e-12 * (1.0 + abs(value))
        for _ in range(MAX_HALVINGS + 1):
            trial = beta - t * step
            if _loss(family, trial, chunks) <= value + slack:
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search failed", float(np.max(np.abs(g))))
        beta = trial
        value, g, H = _derivatives(family, beta, chunks)
    gnorm = float(np.max(np.abs(g)))
    if gnorm <= tol:
        _cholesky(H)
        _check_separation(family, beta, chunks)
        return beta, value, H
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations "
                           f"(gradient sup-norm {gnorm:.3e})", gnorm)


def fit_subsample(data, indices, family: Family, init=None, tol: float = NEWTON_TOL,
                  max_iter: int = NEWTON_MAX_ITER, subsample_id: int = 0,
                  seed: int = 0) -> SubsampleSummary:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= data.n_rows:
        raise ConfigError("subsample indices out of range")
    X, y = data.take(idx)
    beta, value, H = newton_fit(family, X, y, init=init, tol=tol, max_iter=max_iter)
    return SubsampleSummary(k=len(idx), beta_tilde=beta, hessian=H, loss_at_opt=value,
                            subsample_id=subsample_id, seed=seed)


def run_plan(data, plan: SubbaggingPlan, family: Family, threads: int = 1,
             on_error: str = "raise", tol: float = NEWTON_TOL,
             max_iter: int = NEWTON_MAX_ITER) -> list[SubsampleSummary]:
    """Fit all ``plan.m`` subsamples, returned in subsample-id order.

    ``on_error="skip"`` logs failed subsamples and leaves them out.
    """
    if plan.N != data.n_rows:
        raise ConfigError(f"plan N={plan.N} does not match data with {data.n_rows} rows")
    if on_error not in ("raise", "skip"):
        raise ConfigError(f"on_error must be 'raise' or 'skip', got {on_error!r}")

    def one(sid: int):
        seed = subsample_seed(plan.master_seed, sid)
        try:
            idx = draw_subsample(plan.N, plan.k, seed)
            return fit_subsample(data, idx, family, tol=tol, max_iter=max_iter,
                                 subsample_id=sid, seed=seed)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            err = SubsampleError(sid, exc)
            if on_error == "raise":
                raise err from exc
            log.warning("skipping %s", err)
            return None

    ids = range(plan.m)
    if threads <= 1:
        results = [one(s) for s in ids]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, ids))
    return [r for r in results if r is not None]


def gradient_norm(data, indices, family: Family, beta) -> float:
    """Sup-norm of the subsample mean gradient; independent post-hoc check."""
    X, y = data.take(np.asarray(indices, dtype=np.int64))
    _, g, _ = batch_derivatives(family, np.asarray(beta, dtype=float), X, y)
    return float(np.max(np.abs(g)))


__all__ = [
    "SubbaggingPlan", "SubsampleSummary", "draw_subsample", "fit_subsample", "run_plan",
    "newton_fit", "subsample_seed", "gradient_norm", "symmetrize",
]
