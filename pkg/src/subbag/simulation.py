"""Monte Carlo replications of the subbagging pipeline against the full-sample fit.

Each replication draws a fresh dataset with i.i.d. N(0, 1) covariates,
runs both estimators and records per-coefficient estimates, standard
errors and the selected support. Metrics are reductions over the records,
so they do not depend on how replications were scheduled.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baseline import adaptive_lasso_full, fit_full, sandwich_variance
from .data import ArrayDataset
from .errors import SubbagError
from .inference import infer
from .losses import Family, sigmoid
from .pipeline import analyze
from .subsample import SubbaggingPlan, run_plan

log = logging.getLogger(__name__)

BETA0 = (3.0, 1.5, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0)
Z_95 = 1.96  # interval multiplier used in the coverage metric


@dataclass(frozen=True)
class SimConfig:
    family: Family = Family.LOGISTIC
    N: int = 100_000
    beta0: tuple[float, ...] = BETA0
    delta: float = 0.25
    alpha: float = 0.5
    gamma: float = 1.0
    n_reps: int = 200
    master_seed: int = 0
    n_grid: int = 100
    k: int | None = None  # explicit overrides of the rate-derived sizes
    m: int | None = None
    baseline: bool = True
    workers: int = 1
    on_error: str = "raise"

    @property
    def p(self) -> int:
        return len(self.beta0)

    @property
    def true_model(self) -> tuple[int, ...]:
        return tuple(j for j, b in enumerate(self.beta0) if b != 0)

    def plan(self, seed: int = 0) -> SubbaggingPlan:
        base = SubbaggingPlan.from_rates(self.N, self.delta, self.alpha, seed) \
            if self.k is None or self.m is None else None
        k = self.k if self.k is not None else base.k
        m = self.m if self.m is not None else math.floor(self.alpha * self.N / k)
        return SubbaggingPlan(N=self.N, k=k, m=m, master_seed=seed, delta=self.delta,
                              alpha=self.alpha)


def replication_seeds(master_seed: int, rep: int) -> tuple[int, int]:
    """(data seed, subsampling seed) for one replication."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(rep,))
    a, b = ss.generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def generate_dataset(cfg: SimConfig, rep_seed: int) -> ArrayDataset:
    rng = np.random.default_rng(rep_seed)
    beta0 = np.asarray(cfg.beta0, dtype=float)
    X = rng.standard_normal((cfg.N, cfg.p))
    eta = X @ beta0
    if cfg.family is Family.LINEAR:
        y = eta + rng.standard_normal(cfg.N)
    else:
        y = (rng.random(cfg.N) < sigmoid(eta)).astype(float)
    return ArrayDataset(X, y, family=cfg.family)


@dataclass
class RepRecord:
    rep: int
    beta_sub: np.ndarray
    se_sub: np.ndarray          # over the true model; nan when m < 2
    selected_sub: tuple[int, ...]
    covered_selected: np.ndarray  # coverage under the data-driven support (diagnostic)
    null_pvalues: np.ndarray    # all-coordinate mode p-values for true zeros
    lam_sub: float
    beta_full: np.ndarray | None = None
    se_full: np.ndarray | None = None
    selected_full: tuple[int, ...] = ()
    error: str | None = None


def replicate(cfg: SimConfig, rep: int) -> RepRecord:
    data_seed, plan_seed = replication_seeds(cfg.master_seed, rep)
    data = generate_dataset(cfg, data_seed)
    truth = cfg.true_model
    beta0 = np.asarray(cfg.beta0)
    plan = cfg.plan(plan_seed)

    summaries = run_plan(data, plan, cfg.family)
    res = analyze(summaries, cfg.N, cfg.gamma, cfg.n_grid, inference_set=truth, z=Z_95)
    fit = res.fit
    nan_t = np.full(len(truth), np.nan)
    covered_sel = np.zeros(len(truth))
    null_p = np.full(cfg.p - len(truth), np.nan)
    if res.inference is not None:
        se_sub = res.inference.se
        sel = infer(summaries, fit.beta_hat, fit.active_set, cfg.N, z=Z_95)
        for t, j in enumerate(truth):
            if j in sel.active_set:
                pos = sel.active_set.index(j)
                covered_sel[t] = sel.ci_low[pos] <= beta0[j] <= sel.ci_high[pos]
        full_inf = infer(summaries, res.agg.beta_bar, range(cfg.p), cfg.N, z=Z_95)
        null_p = np.array([full_inf.p_value[j] for j in range(cfg.p) if j not in truth])
    else:
        se_sub = nan_t
        covered_sel[:] = np.nan
    rec = RepRecord(rep=rep, beta_sub=fit.beta_hat, se_sub=se_sub, selected_sub=fit.active_set,
                    covered_selected=covered_sel, null_pvalues=null_p, lam_sub=fit.lam)

    if cfg.baseline:
        full = fit_full(data, cfg.family)
        path = adaptive_lasso_full(data, cfg.family, cfg.gamma, cfg.n_grid, fit=full)
        rec.beta_full = path.best.beta_hat
        rec.selected_full = path.best.active_set
        rec.se_full = sandwich_variance(data, cfg.family, rec.beta_full, truth).se
    return rec


def _safe_replicate(args) -> RepRecord:
    cfg, rep = args
    if cfg.on_error == "raise":
        return replicate(cfg, rep)
    try:
        return replicate(cfg, rep)
    except (SubbagError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("replication %d failed: %s", rep, exc)
        return RepRecord(rep=rep, beta_sub=np.array([]), se_sub=np.array([]), selected_sub=(),
                         covered_selected=np.array([]), null_pvalues=np.array([]),
                         lam_sub=math.nan, error=str(exc))


@dataclass(frozen=True)
class EstimationMetrics:
    coef: tuple[int, ...]
    bias: np.ndarray
    sd: np.ndarray
    rmse: np.ndarray
    ase: np.ndarray
    cp: np.ndarray
    n_reps: int


@dataclass(frozen=True)
class SelectionMetrics:
    cf: float
    tp: float
    fp: float
    ms: float
    sd_ms: float
    n_reps: int


def estimation_metrics(estimates: np.ndarray, ses: np.ndarray, beta0, coef) -> EstimationMetrics:
    """Empirical BIAS, SD (1/R divisor), RMSE, ASE and 95% CP per coefficient.

    ``estimates`` is (R, p); ``ses`` is (R, len(coef)).
    """
    coef = tuple(coef)
    est = np.asarray(estimates)[:, coef]
    truth = np.asarray(beta0, dtype=float)[list(coef)]
    mean = est.mean(axis=0)
    bias = mean - truth
    sd = np.sqrt(np.mean((est - mean) ** 2, axis=0))
    rmse = np.sqrt(bias ** 2 + sd ** 2)
    ses = np.asarray(ses, dtype=float)
    ase = ses.mean(axis=0)
    covered = (est - Z_95 * ses <= truth) & (truth <= est + Z_95 * ses)
    cp = np.where(np.isnan(ase), np.nan, covered.mean(axis=0))
    return EstimationMetrics(coef=coef, bias=bias, sd=sd, rmse=rmse, ase=ase, cp=cp,
                             n_reps=len(est))


def selection_metrics(supports, true_model, p: int) -> SelectionMetrics:
    truth = set(true_model)
    false = set(range(p)) - truth
    supports = [set(s) for s in supports]
    sizes = np.array([len(s) for s in supports], dtype=float)
    cf = np.mean([s == truth for s in supports])
    tp = np.mean([len(s & truth) / len(truth) for s in supports]) if truth else 1.0
    fp = np.mean([len(s & false) / len(false) for s in supports]) if false else 0.0
    ms = sizes.mean()
    return SelectionMetrics(cf=float(cf), tp=float(tp), fp=float(fp), ms=float(ms),
                            sd_ms=float(np.sqrt(np.mean((sizes - ms) ** 2))), n_reps=len(supports))


@dataclass
class SimResult:
    cfg: SimConfig
    plan: SubbaggingPlan
    records: list[RepRecord] = field(repr=False)
    sub_estimation: EstimationMetrics
    sub_selection: SelectionMetrics
    full_estimation: EstimationMetrics | None
    full_selection: SelectionMetrics | None
    cp_selected: np.ndarray
    failures: int = 0

    def variance_ratio(self, coef=None) -> np.ndarray:
        """SD^2(subbagging) / SD^2(full sample), per true coefficient."""
        if self.full_estimation is None:
            raise ValueError("baseline was not run")
        r = self.sub_estimation.sd ** 2 / self.full_estimation.sd ** 2
        if coef is None:
            return r
        return r[list(self.sub_estimation.coef).index(coef)]


def run_replications(cfg: SimConfig) -> SimResult:
    jobs = [(cfg, r) for r in range(cfg.n_reps)]
    if cfg.workers <= 1:
        records = [_safe_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_safe_replicate, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    good = [r for r in records if r.error is None]
    if not good:
        raise SubbagError("every replication failed")
    truth = cfg.true_model
    sub_est = estimation_metrics(np.array([r.beta_sub for r in good]),
                                 np.array([r.se_sub for r in good]), cfg.beta0, truth)
    sub_sel = selection_metrics([r.selected_sub for r in good], truth, cfg.p)
    full_est = full_sel = None
    if cfg.baseline:
        full_est = estimation_metrics(np.array([r.beta_full for r in good]),
                                      np.array([r.se_full for r in good]), cfg.beta0, truth)
        full_sel = selection_metrics([r.selected_full for r in good], truth, cfg.p)
    cp_sel = np.array([r.covered_selected for r in good]).mean(axis=0)
    return SimResult(cfg=cfg, plan=cfg.plan(), records=records, sub_estimation=sub_est,
                     sub_selection=sub_sel, full_estimation=full_est, full_selection=full_sel,
                     cp_selected=cp_sel, failures=len(records) - len(good))


def variance_inflation_check(result: SimResult) -> float:
    """Mean over the true model of SD^2(subbagging)/SD^2(full); about 1 + N/(k m)."""
    return float(np.mean(result.variance_ratio()))


def _row(label: str, values) -> str:
    return f"  {label:<6}" + "".join(f"{v:>9.2f}" for v in values)


def format_table(result: SimResult) -> str:
    """Paper-style table; BIAS, SD, RMSE and ASE are multiplied by 100, CP is in %."""
    cfg, plan = result.cfg, result.plan
    lines = [f"{cfg.family.name.lower()}  N={cfg.N}  k={plan.k}  m={plan.m}  "
             f"alpha={cfg.alpha}  delta={cfg.delta:.4g}  reps={result.sub_estimation.n_reps}"]
    blocks = [("subbagging", result.sub_estimation, result.sub_selection)]
    if result.full_estimation is not None:
        blocks.append(("full sample", result.full_estimation, result.full_selection))
    for name, est, sel in blocks:
        lines.append(f" {name}: " + "".join(f"{'b' + str(j + 1):>9}" for j in est.coef))
        lines.append(_row("BIAS", 100 * est.bias))
        lines.append(_row("SD", 100 * est.sd))
        lines.append(_row("RMSE", 100 * est.rmse))
        lines.append(_row("ASE", 100 * est.ase))
        lines.append(_row("CP(%)", 100 * est.cp))
        lines.append(f"  CF={100 * sel.cf:.2f}%  TP={100 * sel.tp:.2f}%  FP={100 * sel.fp:.2f}%  "
                     f"MS={sel.ms:.2f} ({sel.sd_ms:.2f})")
    if result.full_estimation is not None:
        ratio = result.variance_ratio()
        lines.append("  SD^2 ratio: " + " ".join(f"{r:.2f}" for r in ratio) +
                     f"   (1 + N/(k m) = {plan.inflation:.2f})")
    return "\n".join(lines)


def metrics_record(result: SimResult) -> dict:
    """Flat JSON-ready record for one configuration."""
    def conv(obj):
        if isinstance(obj, np.ndarray):
            return [None if not np.isfinite(v) else float(v) for v in obj]
        if isinstance(obj, (tuple, list)):
            return [conv(v) for v in obj]
        return obj

    cfg = asdict(result.cfg)
    cfg["family"] = result.cfg.family.name.lower()
    out = dict(config=cfg, k=result.plan.k, m=result.plan.m, inflation=result.plan.inflation,
               failures=result.failures)
    for key in ("sub_estimation", "sub_selection", "full_estimation", "full_selection"):
        val = getattr(result, key)
        out[key] = None if val is None else {k: conv(v) for k, v in asdict(val).items()}
    out["cp_selected"] = conv(result.cp_selected)
    if result.full_estimation is not None:
        out["variance_ratio"] = conv(result.variance_ratio())
    return out
