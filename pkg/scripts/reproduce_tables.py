"""Monte Carlo tables for the logistic and linear designs.

Desk scale (default): N in {1e4, 1e5}, 200 replications.
Paper scale (--paper-scale): N in {5e5, 1e6}, 1000 replications; expect hours.

    python scripts/reproduce_tables.py --family logistic --out results/logistic.jsonl
"""

import argparse
import os
import sys

from subbag.cli import main


def parse():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=["linear", "logistic"], default="logistic")
    ap.add_argument("--paper-scale", action="store_true")
    ap.add_argument("--reps", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default=None, help="JSON-lines metrics file")
    return ap.parse_args()


if __name__ == "__main__":
    args = parse()
    argv = ["simulate", "--family", args.family, "--delta", "0.25", "0.3333333333333333",
            "--alpha", "0.1", "0.5", "1", "--seed", str(args.seed), "--threads", str(args.workers)]
    if args.paper_scale:
        argv.append("--paper-scale")
    if args.reps:
        argv += ["--reps", str(args.reps)]
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        argv += ["--metrics-out", args.out]
    sys.exit(main(argv))
