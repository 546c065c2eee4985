"""Condition numbers of searched NCP codes under straggling, Table-1 style.

For each (m, n) a best-of-N NCP code is searched at the smallest k listed,
then simulated rounds report MSE, relative error and kappa statistics for
every k.
"""
import argparse

from framecode.distsim import DataSet, NoiseModel, StragglerModel, run_simulation
from framecode.frames import FrameKind
from framecode.montecarlo import SearchPlan, TrialPlan, code_search

SETUPS = {(29, 31): (30, 29), (80, 100): (90, 85, 80)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--candidates", type=int, default=20)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--sigma", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    noise = NoiseModel.gaussian(args.sigma)
    print(f"{'m':>4} {'n':>4} {'k':>4} {'mse':>11} {'rel_err':>11} {'kappa_mean':>11} {'kappa_min':>10} {'kappa_max':>10}")
    for (m, n), ks in SETUPS.items():
        plan = SearchPlan(FrameKind.NCP, args.candidates, TrialPlan(args.trials, args.seed, min(ks)))
        frame = code_search(plan, n, m).best_frame
        data = DataSet.random(4 * m, 8, args.seed)
        for k in ks:
            r = run_simulation(data, frame, noise, StragglerModel.random_k(k), args.trials, args.seed)
            print(f"{m:4d} {n:4d} {k:4d} {r.mse:11.3e} {r.rel_frobenius:11.3e} "
                  f"{r.kappa_mean:11.3f} {r.kappa_min:10.3f} {r.kappa_max:10.3f}")


if __name__ == "__main__":
    main()
