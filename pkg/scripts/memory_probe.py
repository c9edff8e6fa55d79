"""Peak resident memory of an indexed-on-disk fit.

Writes a synthetic logistic CSV (default 1e6 rows, 8 covariates), then runs
``subbag fit --indexed`` in a fresh interpreter and reports its peak RSS
(VmHWM, which unlike ru_maxrss is not inherited from the parent across exec).

    python scripts/memory_probe.py --rows 1000000 --k 1000 --m 20
"""

import argparse
import subprocess
import sys
import tempfile
from pathlib import Path

from subbag.data import write_csv
from subbag.simulation import SimConfig, generate_dataset

PROBE = """
import sys
from subbag.cli import main
code = main(['fit', '--data', sys.argv[1], '--family', 'logistic', '--response', 'y',
             '--k', sys.argv[2], '--m', sys.argv[3], '--indexed'])
hwm = [l for l in open('/proc/self/status') if l.startswith('VmHWM')][0].split()[1]
print('PEAK_KIB', hwm, code)
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=1_000_000)
    ap.add_argument("--k", type=int, default=1000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--csv", default=None, help="reuse an existing CSV with a 'y' column")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        csv = args.csv
        if csv is None:
            csv = str(Path(tmp) / "synthetic.csv")
            data = generate_dataset(SimConfig(N=args.rows), 0)
            write_csv(csv, data.X, data.y)
            del data
        out = subprocess.run([sys.executable, "-c", PROBE, csv, str(args.k), str(args.m)],
                             capture_output=True, text=True, check=True).stdout
    print(out, end="")
    kib = int([l for l in out.splitlines() if l.startswith("PEAK_KIB")][0].split()[1])
    print(f"peak resident set: {kib / 1024:.1f} MiB")


if __name__ == "__main__":
    main()
