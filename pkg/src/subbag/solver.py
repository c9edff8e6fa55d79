"""Weighted-L1 penalized quadratic: coordinate descent, lambda path, SBIC.

Minimizes ``f(b) = b'Hb - 2 q'b + lam * sum_j w_j |b_j|`` for an
:class:`AggregatedQuadratic` ``(H, q)``. A weight of ``inf`` pins the
coordinate at exactly 0; a weight of 0 leaves it unpenalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .aggregate import AggregatedQuadratic, subbagging_loss
from .errors import ConfigError, ConvergenceError, DataError

KKT_TOL = 1e-8
MAX_SWEEPS = 10_000
N_GRID = 100
GRID_RATIO = 1e-6


@dataclass(frozen=True)
class RegularizedFit:
    lam: float
    beta_hat: np.ndarray
    active_set: tuple[int, ...]
    df: int
    sbic: float = math.nan
    converged: bool = True
    n_sweeps: int = 0
    kkt_residual: float = 0.0
    frozen: tuple[int, ...] = ()


@dataclass(frozen=True)
class LambdaPath:
    grid: np.ndarray
    fits: list[RegularizedFit] = field(repr=False)
    selected: int

    @property
    def best(self) -> RegularizedFit:
        return self.fits[self.selected]


def soft_threshold(z: float, t: float) -> float:
    if t < 0:
        raise ValueError("threshold must be non-negative")
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def objective(agg: AggregatedQuadratic, lam: float, weights, beta) -> float:
    """Penalized objective without the constant ``c``."""
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(weights, dtype=float)
    nz = beta != 0
    pen = float(np.sum(w[nz] * np.abs(beta[nz])))
    return float(beta @ agg.H_bar @ beta - 2.0 * agg.b @ beta + lam * pen)


def kkt_residual(agg: AggregatedQuadratic, lam: float, weights, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(weights, dtype=float)
    g = 2.0 * (agg.H_bar @ beta - agg.b)
    res = 0.0
    for j in range(len(beta)):
        if np.isinf(w[j]):
            continue
        if beta[j] != 0:
            r = abs(g[j] + lam * w[j] * math.copysign(1.0, beta[j]))
        else:
            r = max(0.0, abs(g[j]) - lam * w[j])
        res = max(res, r)
    return res


def solve_penalized(agg: AggregatedQuadratic, lam: float, weights, warm_start=None,
                    kkt_tol: float = KKT_TOL, max_sweeps: int = MAX_SWEEPS) -> RegularizedFit:
    """Cyclic coordinate descent with exact coordinate minimization."""
    if lam < 0 or not math.isfinite(lam):
        raise ConfigError(f"lambda must be finite and >= 0, got {lam}")
    w = np.asarray(weights, dtype=float)
    p = agg.p
    if w.shape != (p,) or np.any(np.isnan(w)) or np.any(w < 0):
        raise ConfigError("weights must be p non-negative numbers (inf allowed)")
    if not (np.all(np.isfinite(agg.H_bar)) and np.all(np.isfinite(agg.b))):
        raise DataError("non-finite quadratic")

    H = agg.H_bar.tolist()
    q = agg.b.tolist()
    diag = [H[j][j] for j in range(p)]
    frozen = tuple(j for j in range(p) if not np.isinf(w[j]) and diag[j] <= 0)
    free = [j for j in range(p) if not np.isinf(w[j]) and diag[j] > 0]
    thresh = [0.5 * lam * w[j] if w[j] > 0 else 0.0 for j in range(p)]

    beta = [0.0] * p
    if warm_start is not None:
        for j in free:
            beta[j] = float(warm_start[j])
    Hb = (agg.H_bar @ np.array(beta)).tolist()

    sweeps = 0
    res = math.inf
    while sweeps < max_sweeps:
        sweeps += 1
        biggest = 0.0
        for j in free:
            old = beta[j]
            z = q[j] - Hb[j] + diag[j] * old
            new = soft_threshold(z, thresh[j]) / diag[j]
            if new != old:
                d = new - old
                Hj = H[j]
                for l in range(p):
                    Hb[l] += d * Hj[l]
                beta[j] = new
                if abs(d) > biggest:
                    biggest = abs(d)
        scale = max(1.0, max((abs(v) for v in beta), default=0.0))
        if biggest <= kkt_tol * scale:
            arr = np.array(beta)
            Hb = (agg.H_bar @ arr).tolist()  # drop accumulated update error
            res = kkt_residual(agg, lam, w, arr)
            if res <= kkt_tol:
                break
    else:
        raise ConvergenceError(f"coordinate descent did not converge in {max_sweeps} sweeps "
                               f"(KKT residual {res:.3e})", res)

    beta_hat = np.array(beta)
    active = tuple(int(j) for j in np.flatnonzero(beta_hat))
    return RegularizedFit(lam=float(lam), beta_hat=beta_hat, active_set=active, df=len(active),
                          n_sweeps=sweeps, kkt_residual=res, frozen=frozen)


def _unpenalized_start(agg: AggregatedQuadratic, w: np.ndarray) -> np.ndarray:
    """Minimizer over the zero-weight coordinates with all others at 0."""
    beta = np.zeros(agg.p)
    u = np.flatnonzero(w == 0)
    if u.size:
        beta[u] = np.linalg.solve(agg.H_bar[np.ix_(u, u)], agg.b[u])
    return beta


def lambda_max(agg: AggregatedQuadratic, weights) -> float:
    """Smallest lambda at which every penalized coordinate is zero."""
    w = np.asarray(weights, dtype=float)
    pen = np.flatnonzero(np.isfinite(w) & (w > 0))
    if pen.size == 0:
        raise ConfigError("no coordinate has a finite positive weight")
    g = 2.0 * (agg.H_bar @ _unpenalized_start(agg, w) - agg.b)
    return float(np.max(np.abs(g[pen]) / w[pen]))


def default_lambda_grid(agg: AggregatedQuadratic, weights, n_grid: int = N_GRID,
                        ratio: float = GRID_RATIO) -> np.ndarray:
    """Log-spaced descending grid from ``lambda_max`` down to ``ratio * lambda_max``."""
    if n_grid < 2:
        raise ConfigError("n_grid must be at least 2")
    top = lambda_max(agg, weights)
    if top <= 0:
        top = 1.0
    grid = np.logspace(math.log10(top), math.log10(top * ratio), n_grid)
    grid[0] = top
    return grid


def sbic(agg: AggregatedQuadratic, beta, k: int, N: int) -> float:
    """``k * Lq(beta) + log(N) * df``."""
    beta = np.asarray(beta, dtype=float)
    return k * subbagging_loss(agg, beta) + math.log(N) * int(np.count_nonzero(beta))


def select_lambda(path: LambdaPath | Sequence[RegularizedFit]) -> RegularizedFit:
    """Fit with the smallest SBIC; ties go to the larger lambda."""
    fits = path.fits if isinstance(path, LambdaPath) else list(path)
    if not fits:
        raise ConfigError("empty lambda path")
    return fits[_argmin_sbic(fits)]


def _argmin_sbic(fits: Sequence[RegularizedFit]) -> int:
    best = None
    for i, f in enumerate(fits):
        if best is None or f.sbic < fits[best].sbic or (
                f.sbic == fits[best].sbic and f.lam > fits[best].lam):
            best = i
    return best


def solve_path(agg: AggregatedQuadratic, weights, k: int, N: int, grid=None,
               n_grid: int = N_GRID, kkt_tol: float = KKT_TOL,
               warm_start: bool = True) -> LambdaPath:
    """Solve along a descending grid, score every fit by SBIC, pick the minimum."""
    w = np.asarray(weights, dtype=float)
    grid = default_lambda_grid(agg, w, n_grid) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) >= 0) or np.any(grid < 0):
        raise ConfigError("lambda grid must be non-negative and strictly decreasing")
    start = _unpenalized_start(agg, w)
    fits = []
    for lam in grid:
        fit = solve_penalized(agg, float(lam), w, start, kkt_tol)
        fits.append(replace(fit, sbic=sbic(agg, fit.beta_hat, k, N)))
        if warm_start:
            start = fit.beta_hat
    return LambdaPath(grid=grid, fits=fits, selected=_argmin_sbic(fits))
