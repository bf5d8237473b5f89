"""Cross bridging with and without TWS on the noisy-exogenous synthetic construction.

    python3 scripts/synthetic_ablation.py --seeds 0-4 --length 8000
"""

import argparse

import numpy as np

from twsforecast.experiments import DIRECTION_CONFIG, tws_direction


def seed_range(text: str) -> list[int]:
    lo, _, hi = text.partition("-")
    return list(range(int(lo), int(hi or lo) + 1))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=seed_range, default=seed_range("0-4"))
    p.add_argument("--length", type=int, default=8000)
    p.add_argument("--horizon", type=int, default=DIRECTION_CONFIG.horizon)
    p.add_argument("--dropout", type=float, default=DIRECTION_CONFIG.dropout)
    p.add_argument("--snr-db", type=float, default=0.0)
    args = p.parse_args()

    cfg = DIRECTION_CONFIG.replace(horizon=args.horizon, dropout=args.dropout)
    print("seed\tk\tmse_without\tmse_with\tseconds")
    runs = []
    for seed in args.seeds:
        (run,) = tws_direction([seed], args.length, cfg, snr_db=args.snr_db)
        runs.append(run)
        print(f"{run.seed}\t{run.k}\t{run.mse_without:.5f}\t{run.mse_with:.5f}\t{run.seconds:.1f}", flush=True)
    off = np.mean([r.mse_without for r in runs])
    on = np.mean([r.mse_with for r in runs])
    wins = sum(r.mse_with < r.mse_without for r in runs)
    print(f"mean\t\t{off:.5f}\t{on:.5f}\tTWS better on {wins}/{len(runs)} seeds")


if __name__ == "__main__":
    main()
