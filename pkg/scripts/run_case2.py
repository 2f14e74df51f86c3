"""Case 2 benchmark: displacement-only network trained from response accelerations.

    python3 scripts/run_case2.py --seed 0 --epochs 600
"""
import argparse

import numpy as np

from phycnn.experiments import BenchmarkConfig, benchmark_data, run_case2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=600)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--n-train", type=int, default=50)
    args = ap.parse_args()

    data = benchmark_data(BenchmarkConfig())
    r = run_case2(data, args.seed, args.epochs, args.n_train, args.lr)
    q = np.percentile(r.heldout_r, [10, 50, 90])
    print(f"held-out displacement r: p10 {q[0]:.3f}  median {q[1]:.3f}  p90 {q[2]:.3f}")
    print(f"training records r mean {np.mean(r.train_r):.3f}; best epoch {r.best_epoch}; {r.seconds:.0f} s")


if __name__ == "__main__":
    main()
