"""Fragility from a Case 1 surrogate vs direct simulation over the same suite.

    python3 scripts/run_fragility.py --epochs 1500 --out fragility.csv
"""
import argparse

from phycnn import io
from phycnn.experiments import BenchmarkConfig, benchmark_data, fragility_consistency, fragility_suite, run_case1
from phycnn.fragility import LimitState


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=1500)
    ap.add_argument("--suite", type=int, default=100)
    ap.add_argument("--drift", type=float, default=0.005)
    ap.add_argument("--height", type=float, default=20.0, help="story height [m]")
    ap.add_argument("--out", help="write both curves to this CSV")
    args = ap.parse_args()

    model = run_case1(benchmark_data(BenchmarkConfig()), args.seed, args.epochs).params
    suite = fragility_suite(args.suite, seed=args.seed)
    sur, sim = fragility_consistency(model, suite, LimitState(args.drift, args.height))
    for name, res in (("surrogate", sur), ("simulator", sim)):
        n_exc = sum(o.exceeded for o in res.observations)
        print(f"{name:<10s} median {res.params.median:.4f} g  beta {res.params.beta:.4f}  "
              f"exceedances {n_exc}/{len(res.observations)}")
    print(f"median ratio surrogate/simulator = {sur.params.median / sim.params.median:.3f}")
    if args.out:
        io.write_csv(args.out, ["pga [g]", "p_surrogate", "p_simulator"],
                     zip(sur.grid, sur.probabilities, sim.probabilities))


if __name__ == "__main__":
    main()
