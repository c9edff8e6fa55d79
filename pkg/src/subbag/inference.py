"""Subsample-spread variance, standard errors and Wald intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .subsample import SubsampleSummary

# Acklam's rational approximation to the standard normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(u: float) -> float:
    """Inverse standard normal CDF; one Halley step brings the error below 1e-12."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    if u > 0.5:
        # 1 - u is exact here, and the lower tail keeps the Halley residual accurate
        return -normal_quantile(1.0 - u)
    if u < _P_LOW:
        q = math.sqrt(-2.0 * math.log(u))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    else:
        q = u - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    e = normal_cdf(x) - u
    step = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - step / (1.0 + 0.5 * x * step)


@dataclass(frozen=True)
class InferenceReport:
    active_set: tuple[int, ...]
    estimate: np.ndarray
    psi_hat: np.ndarray
    se: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    p_value: np.ndarray
    inflation: float
    level: float = 0.95
    degenerate: tuple[int, ...] = ()  # positions (in active_set order) with SE == 0


def variance_estimator(summaries: Sequence[SubsampleSummary], active_set: Sequence[int]) -> np.ndarray:
    """``(k/m) * sum_s (bt_s - bbar)(bt_s - bbar)'`` on the active coordinates."""
    m = len(summaries)
    if m < 2:
        raise ConfigError(f"variance estimation needs at least 2 subsamples, got {m}")
    k = summaries[0].k
    if any(s.k != k for s in summaries):
        raise ConfigError("summaries have different subsample sizes")
    idx = np.asarray(active_set, dtype=np.int64)
    B = np.array([s.beta_tilde[idx] for s in summaries])
    D = B - B.mean(axis=0)
    psi = (k / m) * (D.T @ D)
    return 0.5 * (psi + psi.T)


def standard_errors(psi_hat, N: int, k: int, m: int) -> np.ndarray:
    d = np.diag(np.atleast_2d(psi_hat)).astype(float)
    if np.any(d < 0):
        raise NumericalError("negative variance on the diagonal")
    return np.sqrt((1.0 + N / (k * m)) * d / N)


def wald_intervals(estimate, se, level: float = 0.95, z: float | None = None):
    """Two-sided Wald intervals and p-values.

    Returns ``(ci_low, ci_high, p_value, degenerate)`` where ``degenerate``
    lists positions whose SE is 0 (p-value 0 if the estimate is nonzero, else 1).
    """
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    est = np.asarray(estimate, dtype=float)
    se = np.asarray(se, dtype=float)
    if est.shape != se.shape:
        raise DataError("estimate and SE lengths differ")
    if z is None:
        z = normal_quantile(0.5 * (1.0 + level))
    low = est - z * se
    high = est + z * se
    p = np.empty_like(est)
    degenerate = []
    for j in range(len(est)):
        if se[j] > 0:
            p[j] = math.erfc(abs(est[j] / se[j]) / math.sqrt(2.0))
        else:
            degenerate.append(j)
            p[j] = 0.0 if est[j] != 0 else 1.0
    return low, high, p, tuple(degenerate)


def infer(summaries: Sequence[SubsampleSummary], estimate, active_set: Sequence[int], N: int,
          level: float = 0.95, z: float | None = None) -> InferenceReport:
    """Full report for the coefficients in ``active_set``.

    ``estimate`` is the length-p coefficient vector; only its active entries are used.
    """
    active = tuple(int(j) for j in active_set)
    est = np.asarray(estimate, dtype=float)[list(active)]
    k, m = summaries[0].k, len(summaries)
    psi = variance_estimator(summaries, active)
    se = standard_errors(psi, N, k, m)
    low, high, p, degenerate = wald_intervals(est, se, level, z)
    return InferenceReport(active_set=active, estimate=est, psi_hat=psi, se=se, ci_low=low,
                           ci_high=high, p_value=p, inflation=1.0 + N / (k * m), level=level,
                           degenerate=degenerate)
