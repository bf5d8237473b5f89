"""Full ablation on one or more benchmark CSVs, one report directory per dataset.

    python3 scripts/run_benchmark.py data/ETTh1.csv data/ETTm1.csv --out runs/ --d-model 64

Extra flags are passed through to ``twsforecast ablate``.
"""

import argparse
import sys
from pathlib import Path

from twsforecast.cli import main as cli


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv", nargs="+", type=Path)
    p.add_argument("--out", type=Path, default=Path("runs"))
    args, passthrough = p.parse_known_args()
    status = 0
    for path in args.csv:
        print(f"== {path.stem}", flush=True)
        status |= cli(["-v", "ablate", "--data", str(path), "--out", str(args.out / path.stem), *passthrough])
    return status


if __name__ == "__main__":
    sys.exit(main())
