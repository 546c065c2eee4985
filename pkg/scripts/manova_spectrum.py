"""Pooled sub-frame spectrum of a difference-set harmonic frame versus MP and MANOVA.

Prints KS distances and a text histogram of the unit-mean eigenvalues with
both predicted bin masses alongside.
"""
import argparse

import numpy as np

from framecode.frames import harmonic_frame, quadratic_residue_difference_set
from framecode.montecarlo import sample_retained_set
from framecode.parallel import trial_rng
from framecode.spectra import DensityKind, DensityParams, analyze_subframe, ks_distance_to_density, \
    spectral_law, subframe


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=199, help="prime, 3 mod 4")
    ap.add_argument("--k-over-n", type=float, default=0.5)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--bins", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    frame = harmonic_frame(args.n, quadratic_residue_difference_set(args.n))
    m, n = frame.m, frame.n
    k = int(round(args.k_over_n * n))
    ev = np.concatenate([
        analyze_subframe(subframe(frame, sample_retained_set(n, k, trial_rng(args.seed, t)))).eigenvalues
        for t in range(args.trials)])
    params = DensityParams.from_counts(m, n, k)
    print(f"m={m} n={n} k={k} gamma={params.gamma:.4f} beta={params.beta:.4f} eigenvalues={ev.size}")
    for kind in DensityKind:
        print(f"KS distance to {kind.value}: {ks_distance_to_density(ev, kind, params):.4f}")

    x = ev / ev.mean()
    counts, edges = np.histogram(x, bins=args.bins)
    laws = {kind: spectral_law(kind, params) for kind in DensityKind}
    print(f"{'bin':>15} {'empirical':>10} {'MP':>8} {'MANOVA':>8}")
    for i, c in enumerate(counts):
        pred = []
        for law in laws.values():
            scale = law.mean() / law.mass()
            pred.append(float(law.cdf(edges[i + 1], scale) - law.cdf(edges[i], scale)) / law.mass())
        bar = "#" * int(round(60 * c / counts.max()))
        print(f"{edges[i]:6.3f}-{edges[i + 1]:6.3f}  {c / x.size:10.4f} {pred[0]:8.4f} {pred[1]:8.4f} {bar}")


if __name__ == "__main__":
    main()
