"""Summaries -> surrogate loss -> SBIC-selected adaptive LASSO -> inference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aggregate import AggregatedQuadratic, adaptive_weights, merge, tree_reduce
from .inference import InferenceReport, infer
from .solver import N_GRID, LambdaPath, RegularizedFit, solve_path
from .subsample import SubsampleSummary


@dataclass(frozen=True)
class SubbaggingResult:
    N: int
    agg: AggregatedQuadratic
    weights: np.ndarray
    path: LambdaPath
    inference: InferenceReport | None
    note: str = ""

    @property
    def fit(self) -> RegularizedFit:
        return self.path.best


def aggregate_groups(groups: Sequence[Sequence[SubsampleSummary]]) -> AggregatedQuadratic:
    """Merge each group, then tree-reduce the partial aggregates in order."""
    return tree_reduce([merge(g) for g in groups])


def analyze(summaries: Sequence[SubsampleSummary], N: int, gamma: float = 1.0,
            n_grid: int = N_GRID, unpenalized: Sequence[int] = (),
            inference_set: str | Sequence[int] | None = "selected",
            agg: AggregatedQuadratic | None = None, z: float | None = None) -> SubbaggingResult:
    """Run selection and inference on a list of summaries.

    ``inference_set`` is ``"selected"`` (the SBIC-selected support, using the
    penalized estimates), ``"all"`` (every coordinate, using the unpenalized
    subbagging mean; a calibration diagnostic), an explicit index list
    (penalized estimates), or ``None`` to skip inference.
    """
    agg = merge(summaries) if agg is None else agg
    w = adaptive_weights(agg.beta_bar, gamma, unpenalized)
    path = solve_path(agg, w, k=agg.k, N=N, n_grid=n_grid)
    fit = path.best

    report = None
    note = ""
    if inference_set is not None:
        if len(summaries) < 2:
            note = "inference skipped: fewer than 2 subsamples"
        elif isinstance(inference_set, str) and inference_set == "all":
            report = infer(summaries, agg.beta_bar, range(agg.p), N, z=z)
        else:
            active = fit.active_set if isinstance(inference_set, str) else tuple(inference_set)
            report = infer(summaries, fit.beta_hat, active, N, z=z)
    return SubbaggingResult(N=N, agg=agg, weights=w, path=path, inference=report, note=note)


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def build_report(result: SubbaggingResult, names: Sequence[str] | None = None,
                 family: str | None = None, levels: dict | None = None) -> dict:
    """Machine-readable report; field names are stable."""
    agg = result.agg
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(agg.p)]
    fit = result.fit
    rows = []
    inf = result.inference
    by_index = {}
    if inf is not None:
        for pos, j in enumerate(inf.active_set):
            by_index[j] = dict(estimate=float(inf.estimate[pos]), se=float(inf.se[pos]),
                               ci_low=float(inf.ci_low[pos]), ci_high=float(inf.ci_high[pos]),
                               p_value=float(inf.p_value[pos]))
    for j in range(agg.p):
        row = dict(index=j, name=names[j], selected=bool(fit.beta_hat[j] != 0),
                   estimate=float(fit.beta_hat[j]), subbagging_mean=float(agg.beta_bar[j]),
                   weight=_num(result.weights[j]))
        if j in by_index:
            row["inference"] = by_index[j]
        rows.append(row)
    return dict(
        family=family,
        N=result.N, k=agg.k, m=agg.m, p=agg.p,
        inflation=1.0 + result.N / (agg.k * agg.m),
        lambda_hat=fit.lam,
        sbic_hat=fit.sbic,
        selected=[names[j] for j in fit.active_set],
        coefficients=rows,
        inference_level=inf.level if inf is not None else None,
        note=result.note,
        sbic_table=[dict(lam=f.lam, df=f.df, sbic=f.sbic) for f in result.path.fits],
        levels=levels or {},
    )
