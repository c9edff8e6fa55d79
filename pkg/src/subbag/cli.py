"""Command line entry point: ``subbag {fit-subsamples,aggregate,fit,simulate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import summaryfile
from .config import RunConfig
from .data import load_csv
from .errors import ConfigError, DataError, SubbagError
from .losses import Family
from .pipeline import aggregate_groups, analyze, build_report
from .subsample import run_plan

log = logging.getLogger("subbag")


def _csv_list(text: str | None) -> list[str] | None:
    if text is None or text == "all-others":
        return None
    return [c.strip() for c in text.split(",") if c.strip()]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--family", choices=["linear", "logistic"], required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", default=None,
                   help="comma-separated column names, or 'all-others' (default)")
    p.add_argument("--categorical", default=None, help="columns to force to categorical")
    p.add_argument("--intercept", action="store_true", help="add an unpenalized intercept")
    size = p.add_argument_group("sizing (give one of each pair)")
    size.add_argument("--delta", type=float, help="k = floor(N^(1/2 + delta))")
    size.add_argument("--k", type=int, help="explicit subsample size")
    size.add_argument("--alpha", type=float, help="m = floor(alpha N / k)")
    size.add_argument("--m", type=int, help="explicit number of subsamples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--indexed", action="store_true",
                   help="keep only a row-offset index in memory and read rows on demand")
    p.add_argument("--on-error", choices=["raise", "skip"], default="raise")


def _add_select_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=100, help="number of lambda values")
    p.add_argument("--inference", choices=["selected", "all", "none"], default="selected",
                   help="'all' reports every coefficient at its unpenalized subbagging mean")
    p.add_argument("--report-out", default=None, help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subbag", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-subsamples", help="fit subsamples and write a summary file")
    _add_data_args(p)
    p.add_argument("--summaries-out", required=True)

    p = sub.add_parser("aggregate", help="select and infer from one or more summary files")
    p.add_argument("--summaries-in", nargs="+", required=True)
    p.add_argument("--n", type=int, default=None,
                   help="full-sample size N (default: read from the .meta.json sidecar)")
    _add_select_args(p)

    p = sub.add_parser("fit", help="fit-subsamples followed by aggregate")
    _add_data_args(p)
    p.add_argument("--summaries-out", default=None)
    _add_select_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo tables for the synthetic designs")
    p.add_argument("--family", choices=["linear", "logistic"], default="logistic")
    p.add_argument("--n", type=int, nargs="+", default=None)
    p.add_argument("--delta", type=float, nargs="+", default=[0.25])
    p.add_argument("--alpha", type=float, nargs="+", default=[0.1, 0.5, 1.0])
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--paper-scale", action="store_true",
                   help="N in {500000, 1000000} with 1000 replications (hours)")
    p.add_argument("--metrics-out", default=None, help="JSON-lines metrics file")
    return ap


def _run_config(args) -> RunConfig:
    cfg = RunConfig(
        family=Family.parse(args.family), response=args.response,
        covariates=_csv_list(args.covariates), categorical=_csv_list(args.categorical) or [],
        intercept=args.intercept, delta=args.delta, k=args.k, alpha=args.alpha, m=args.m,
        gamma=getattr(args, "gamma", 1.0), n_grid=getattr(args, "grid", 100), seed=args.seed,
        threads=args.threads, indexed=args.indexed, on_error=args.on_error,
        summaries_out=args.summaries_out, report_out=getattr(args, "report_out", None),
        data=args.data)
    cfg.validate()
    return cfg


def _meta_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def fit_subsamples(cfg: RunConfig):
    """Phase one. Returns ``(summaries, metadata)`` and writes them if configured."""
    data = load_csv(cfg.data, cfg.schema(), indexed=cfg.indexed)
    plan = cfg.plan(data.n_rows)
    log.info("N=%d p=%d k=%d m=%d", plan.N, data.n_features, plan.k, plan.m)
    summaries = run_plan(data, plan, cfg.family, threads=cfg.threads, on_error=cfg.on_error)
    meta = dict(N=data.n_rows, family=cfg.family.name.lower(), names=data.feature_names,
                intercept_index=data.intercept_index, levels=data.levels,
                response=cfg.response, k=plan.k, m_planned=plan.m, master_seed=plan.master_seed)
    if cfg.summaries_out:
        summaryfile.write(cfg.summaries_out, cfg.family, summaries, plan.master_seed,
                          p=data.n_features, k=plan.k)
        _meta_path(cfg.summaries_out).write_text(json.dumps(meta, indent=1))
    return summaries, meta


def aggregate(groups: Sequence[list], meta: dict, N: int, gamma: float, n_grid: int,
              inference: str) -> dict:
    """Phase two on already-loaded summary groups (one group per file)."""
    summaries = [s for g in groups for s in g]
    if not summaries:
        raise DataError("no subsample summaries to aggregate")
    agg = aggregate_groups([g for g in groups if g])
    unpen = () if meta.get("intercept_index") is None else (meta["intercept_index"],)
    inference_set = None if inference == "none" else inference
    result = analyze(summaries, N, gamma, n_grid, unpenalized=unpen,
                     inference_set=inference_set, agg=agg)
    return build_report(result, meta.get("names"), meta.get("family"), meta.get("levels"))


def _load_groups(paths: Sequence[str]):
    files = [summaryfile.read(p) for p in paths]
    first = files[0]
    for path, f in zip(paths, files):
        if (f.family, f.p, f.k) != (first.family, first.p, first.k):
            raise ConfigError(f"{path}: incompatible with {paths[0]} (family, p, k differ)")
    meta = {}
    mp = _meta_path(paths[0])
    if mp.exists():
        meta = json.loads(mp.read_text())
    meta.setdefault("family", first.family.name.lower())
    return [f.summaries for f in files], meta


def format_report(report: dict) -> str:
    lines = [f"family={report['family']}  N={report['N']}  k={report['k']}  m={report['m']}  "
             f"p={report['p']}",
             f"lambda_hat={report['lambda_hat']:.6g}  SBIC={report['sbic_hat']:.6g}  "
             f"selected={len(report['selected'])}"]
    if report["note"]:
        lines.append(report["note"])
    lines.append(f"{'variable':<24}{'estimate':>12}{'SE':>12}{'95% CI':>26}{'p-value':>11}")
    for row in report["coefficients"]:
        inf = row.get("inference")
        if not row["selected"] and inf is None:
            continue
        est = inf["estimate"] if inf else row["estimate"]
        if inf:
            ci = f"({inf['ci_low']:.5g}, {inf['ci_high']:.5g})"
            lines.append(f"{row['name']:<24}{est:>12.5g}{inf['se']:>12.4g}{ci:>26}"
                         f"{inf['p_value']:>11.3g}")
        else:
            lines.append(f"{row['name']:<24}{est:>12.5g}{'-':>12}{'-':>26}{'-':>11}")
    return "\n".join(lines)


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=1, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(format_report(report))


def cmd_fit_subsamples(args) -> int:
    cfg = _run_config(args)
    summaries, meta = fit_subsamples(cfg)
    print(f"wrote {len(summaries)} summaries (k={meta['k']}, p={len(meta['names'])}) "
          f"to {cfg.summaries_out}")
    return 0


def cmd_aggregate(args) -> int:
    groups, meta = _load_groups(args.summaries_in)
    N = args.n if args.n is not None else meta.get("N")
    if N is None:
        raise ConfigError("--n is required when no .meta.json sidecar is present")
    report = aggregate(groups, meta, int(N), args.gamma, args.grid, args.inference)
    _emit(report, args.report_out)
    return 0


def cmd_fit(args) -> int:
    cfg = _run_config(args)
    summaries, meta = fit_subsamples(cfg)
    report = aggregate([summaries], meta, meta["N"], cfg.gamma, cfg.n_grid, args.inference)
    _emit(report, cfg.report_out)
    return 0


def cmd_simulate(args) -> int:
    from .simulation import SimConfig, format_table, metrics_record, run_replications

    Ns = args.n or ([500_000, 1_000_000] if args.paper_scale else [10_000, 100_000])
    reps = args.reps or (1000 if args.paper_scale else 200)
    out = open(args.metrics_out, "w") if args.metrics_out else None
    try:
        for N in Ns:
            for delta in args.delta:
                for alpha in args.alpha:
                    cfg = SimConfig(family=Family.parse(args.family), N=N, delta=delta,
                                    alpha=alpha, gamma=args.gamma, n_reps=reps,
                                    master_seed=args.seed, n_grid=args.grid,
                                    baseline=not args.no_baseline, workers=args.threads)
                    result = run_replications(cfg)
                    print(format_table(result), flush=True)
                    print()
                    if out:
                        out.write(json.dumps(metrics_record(result), sort_keys=True) + "\n")
                        out.flush()
    finally:
        if out:
            out.close()
    return 0


_COMMANDS = {"fit-subsamples": cmd_fit_subsamples, "aggregate": cmd_aggregate,
             "fit": cmd_fit, "simulate": cmd_simulate}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else ConfigError.exit_code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except SubbagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, ValueError) as exc:
        # numpy linear-algebra failures and overflow that escaped a typed error
        print(f"error: {exc}", file=sys.stderr)
        return 4 if isinstance(exc, ArithmeticError) else 2


if __name__ == "__main__":
    sys.exit(main())

