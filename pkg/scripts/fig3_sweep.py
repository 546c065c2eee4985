"""Noise amplification against redundancy (m = 50, k/n = 1/2).

Searches NCP and NUSPC codes at each redundancy, evaluates the USPC baseline,
and writes a CSV next to the MP and MANOVA benchmarks. Full scale
(--candidates 200 --trials 10000) takes hours; the defaults take minutes.
"""
import argparse
import csv
import sys
from dataclasses import asdict

from framecode.frames import FrameKind
from framecode.montecarlo import SearchPlan, TrialPlan, gamma_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--inv-gamma", type=float, nargs="+", default=[2, 3, 4, 5, 6, 7, 8])
    ap.add_argument("--k-over-n", type=float, default=0.5)
    ap.add_argument("--candidates", type=int, default=20)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    plan = SearchPlan(FrameKind.NCP, args.candidates, TrialPlan(args.trials, args.seed, args.m))
    rows = gamma_sweep(args.m, args.inv_gamma, args.k_over_n, plan)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.DictWriter(fh, fieldnames=list(asdict(rows[0])))
    w.writeheader()
    for r in rows:
        w.writerow(asdict(r))
    if fh is not sys.stdout:
        fh.close()

    for g in args.inv_gamma:
        by = {r.family: r for r in rows if r.gamma_inv == g}
        print(f"1/gamma={g:g}: " + "  ".join(f"{f}={by[f].mean_amp:.4g}" for f in ("NCP", "NUSPC", "USPC"))
              + f"  MP={by['NCP'].mp_benchmark:.4g}  MANOVA={by['NCP'].manova_benchmark:.4g}", file=sys.stderr)


if __name__ == "__main__":
    main()
