"""Merging subsample summaries into one quadratic surrogate loss.

The surrogate is the average of the per-subsample second-order expansions,

    Lq(b) = mean_s (b - bt_s)' H_s (b - bt_s) = b' Hbar b - 2 bvec' b + c,

stored in expanded form so that memory does not grow with the number of
subsamples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .losses import symmetrize
from .subsample import SubsampleSummary


@dataclass(frozen=True)
class AggregatedQuadratic:
    m: int
    k: int
    H_bar: np.ndarray
    b: np.ndarray
    c: float
    beta_bar: np.ndarray
    C_loss: float

    @property
    def p(self) -> int:
        return len(self.b)

    def loss(self, beta) -> float:
        return subbagging_loss(self, beta)

    def gradient(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        return 2.0 * (self.H_bar @ beta - self.b)


def merge(summaries: Sequence[SubsampleSummary]) -> AggregatedQuadratic:
    if not summaries:
        raise ConfigError("cannot merge an empty list of summaries")
    p, k = summaries[0].p, summaries[0].k
    for s in summaries:
        if s.p != p or s.k != k:
            raise ConfigError(f"incompatible summaries: (p, k) = {(s.p, s.k)} vs {(p, k)}")
    m = len(summaries)
    H_sum = np.zeros((p, p))
    b_sum = np.zeros(p)
    c_sum = 0.0
    beta_sum = np.zeros(p)
    loss_sum = 0.0
    for s in summaries:
        Hb = s.hessian @ s.beta_tilde
        H_sum += s.hessian
        b_sum += Hb
        c_sum += float(s.beta_tilde @ Hb)
        beta_sum += s.beta_tilde
        loss_sum += s.loss_at_opt
    return AggregatedQuadratic(m=m, k=k, H_bar=symmetrize(H_sum / m), b=b_sum / m, c=c_sum / m,
                               beta_bar=beta_sum / m, C_loss=loss_sum / m)


def combine(*parts: AggregatedQuadratic) -> AggregatedQuadratic:
    """Weighted merge of partial aggregates (weights are their ``m``)."""
    if not parts:
        raise ConfigError("nothing to combine")
    p, k = parts[0].p, parts[0].k
    for a in parts:
        if a.p != p or a.k != k:
            raise ConfigError(f"incompatible aggregates: (p, k) = {(a.p, a.k)} vs {(p, k)}")
    if len(parts) == 1:
        return parts[0]
    m = sum(a.m for a in parts)
    w = [a.m / m for a in parts]
    return AggregatedQuadratic(
        m=m, k=k,
        H_bar=symmetrize(sum(wi * a.H_bar for wi, a in zip(w, parts))),
        b=sum(wi * a.b for wi, a in zip(w, parts)),
        c=float(sum(wi * a.c for wi, a in zip(w, parts))),
        beta_bar=sum(wi * a.beta_bar for wi, a in zip(w, parts)),
        C_loss=float(sum(wi * a.C_loss for wi, a in zip(w, parts))),
    )


def tree_reduce(parts: Sequence[AggregatedQuadratic]) -> AggregatedQuadratic:
    """Pairwise reduction in a fixed order, so the result depends only on input order."""
    level = list(parts)
    if not level:
        raise ConfigError("nothing to reduce")
    while len(level) > 1:
        level = [combine(*level[i:i + 2]) for i in range(0, len(level), 2)]
    return level[0]


def subbagging_loss(agg: AggregatedQuadratic, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (agg.p,):
        raise DataError(f"dimension mismatch: beta {beta.shape}, p={agg.p}")
    return float(beta @ agg.H_bar @ beta - 2.0 * agg.b @ beta + agg.c)


def adaptive_weights(beta_bar, gamma: float = 1.0, unpenalized: Sequence[int] = ()) -> np.ndarray:
    """``1/|beta_bar_j|**gamma``; exact zeros map to ``inf`` (coefficient frozen at 0).

    Positions in ``unpenalized`` (e.g. an intercept) get weight 0.
    """
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    a = np.abs(np.asarray(beta_bar, dtype=float))
    with np.errstate(divide="ignore"):
        w = 1.0 / a ** gamma
    w[a == 0] = np.inf
    for j in unpenalized:
        w[j] = 0.0
    return w


def single_summary_quadratic(beta: np.ndarray, hessian: np.ndarray, loss_value: float,
                             k: int) -> AggregatedQuadratic:
    """Quadratic expansion of one loss around its minimizer (an m=1 aggregate)."""
    return merge([SubsampleSummary(k=k, beta_tilde=np.asarray(beta, dtype=float),
                                   hessian=np.asarray(hessian, dtype=float),
                                   loss_at_opt=float(loss_value), subsample_id=0, seed=0)])
