"""Case 1 benchmark: full-state training on 10 of 100 records, PhyCNN vs baseline.

    python3 scripts/run_case1.py --seeds 0 1 2 3 4 --epochs 1500
"""
import argparse
import json

import numpy as np

from phycnn.experiments import BenchmarkConfig, benchmark_data, run_case1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=1500)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--out", help="optional JSON summary path")
    args = ap.parse_args()

    data = benchmark_data(BenchmarkConfig())
    rows = []
    print("seed  lambda_P  median_r  mean_r  train_r  best_epoch  seconds")
    for seed in args.seeds:
        for lam in (1.0, 0.0):
            r = run_case1(data, seed, args.epochs, lam, lr=args.lr)
            rows.append({"seed": seed, "lambda_phys": lam, "median_r": r.median_r, "mean_r": r.mean_r,
                         "train_mean_r": float(np.mean(r.train_r)), "best_epoch": r.best_epoch,
                         "seconds": r.seconds})
            print(f"{seed:<5d} {lam:<9.1f} {r.median_r:<9.4f} {r.mean_r:<7.4f} {np.mean(r.train_r):<8.4f} "
                  f"{r.best_epoch:<11d} {r.seconds:.0f}", flush=True)
    wins = sum(a["mean_r"] >= b["mean_r"] for a, b in zip(rows[::2], rows[1::2]))
    print(f"PhyCNN mean r >= baseline in {wins}/{len(args.seeds)} seeds")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
