"""``framecode`` command-line front end.

Every subcommand writes CSV or JSON carrying a metadata header with the
version, seed and full resolved parameters. Exit codes: 0 success, 2 invalid
arguments or input, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, fields, is_dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .distsim import (
    DataSet,
    NoiseModel,
    StragglerModel,
    export_frame,
    import_frame,
    load_csv_matrix,
    run_simulation,
)
from .errors import FormatError, FramecodeError, InvalidParameters, UnsupportedParameters
from .frames import (
    Frame,
    FrameKind,
    NuspcParams,
    build_frame,
    find_difference_set,
    frame_properties,
    harmonic_frame,
    ncp_spec,
    nuspc_spec,
    quadratic_residue_difference_set,
    random_gaussian_frame,
    uspc_spec,
)
from .montecarlo import SearchPlan, TrialPlan, code_search, estimate_noise_amp, gamma_sweep, sample_retained_set
from .parallel import trial_rng
from .spectra import DensityKind, DensityParams, analyze_subframe, ks_distance_to_density, spectral_law, \
    theoretical_noise_amp

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
DEFAULT_TRIALS = 10_000
DEFAULT_CANDIDATES = 200

log = logging.getLogger("framecode")


class UsageError(Exception):
    """Bad flag value; the message names the flag."""


# --------------------------------------------------------------------------
# argument parsing helpers


def parse_range(text: str) -> List[float]:
    """``lo:hi[:step]`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi = parts[:2]
            step = parts[2] if len(parts) == 3 else 1.0
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            vals = [lo + i * step for i in range(count)]
        else:
            vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi[:step] or a comma list, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty range")
    return [int(v) if float(v).is_integer() else v for v in vals]


def int_list(text: str) -> List[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}") from None


def non_negative_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def positive_int(text: str) -> int:
    v = non_negative_int(text)
    if v == 0:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _add_frame_source(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("frame source")
    g.add_argument("--frame", help="frame file to load (.frame text or .npy)")
    g.add_argument("--family", choices=["uspc", "nuspc", "ncp", "gaussian", "harmonic"])
    g.add_argument("--n", type=positive_int, help="number of nodes")
    g.add_argument("--m", type=positive_int, help="number of message blocks")
    g.add_argument("--powers", default="random",
                   help="NCP power set: 'qr' (quadratic residues), 'ds' (difference-set search), "
                        "'random', or a comma list")
    g.add_argument("--rows", help="harmonic rows: 'qr' or a comma list (default 0..m-1)")
    g.add_argument("--b", type=positive_int, help="NUSPC grid refinement")
    g.add_argument("--r", type=positive_int, help="NUSPC offsets per period")
    g.add_argument("--y", type=int_list, help="NUSPC offsets, comma list")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default from --out suffix, else json)")


def _add_trials(p: argparse.ArgumentParser, k: bool = True) -> None:
    p.add_argument("--trials", type=positive_int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=non_negative_int, default=0)
    if k:
        p.add_argument("--k", type=positive_int, help="retained node count")
        p.add_argument("--k-over-n", type=float, help="retained fraction (alternative to --k)")


def _add_noise(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise", choices=["none", "gaussian", "round"], default="gaussian")
    p.add_argument("--sigma", type=float, default=1e-6)
    p.add_argument("--bits", type=int, default=52)
    p.add_argument("--h", type=positive_int, help="rows of the random data matrix (default 4*m)")
    p.add_argument("--l", type=positive_int, default=8, help="columns of the random data matrix")
    p.add_argument("--data", help="CSV file holding A (overrides --h/--l)")
    p.add_argument("--x", help="CSV file holding x")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framecode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"framecode {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="construct a frame, report its properties, optionally export it")
    _add_frame_source(p)
    p.add_argument("--seed", type=non_negative_int, default=0)
    p.add_argument("--out", help="frame file to write (.npy for binary)")

    p = sub.add_parser("spectrum", help="pooled sub-frame eigenvalues against MP and MANOVA")
    _add_frame_source(p)
    _add_trials(p)
    p.add_argument("--bins", type=positive_int, default=50)
    _add_output(p)

    p = sub.add_parser("noiseamp", help="Monte-Carlo noise amplification of one frame")
    _add_frame_source(p)
    _add_trials(p)
    _add_output(p)

    p = sub.add_parser("search", help="best-of-N code search within one family")
    p.add_argument("--family", choices=["uspc", "nuspc", "ncp"], required=True)
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--m", type=positive_int, required=True)
    _add_trials(p)
    p.add_argument("--candidates", type=positive_int, default=DEFAULT_CANDIDATES)
    p.add_argument("--prescreen", type=non_negative_int, default=50)
    p.add_argument("--b-values", type=int_list, default=[2, 3, 4])
    p.add_argument("--r-values", type=int_list)
    p.add_argument("--inject", choices=["qr"], help="evaluate the quadratic-residue power set first")
    p.add_argument("--save-best", help="write the winning frame to this file")
    _add_output(p)

    p = sub.add_parser("sweep", help="noise amplification against redundancy for every family")
    p.add_argument("--m", type=positive_int, required=True)
    p.add_argument("--inv-gamma", type=parse_range, required=True)
    p.add_argument("--k-over-n", type=float, default=0.5)
    p.add_argument("--families", default="ncp,nuspc")
    p.add_argument("--candidates", type=positive_int, default=DEFAULT_CANDIDATES)
    p.add_argument("--prescreen", type=non_negative_int, default=50)
    p.add_argument("--b-values", type=int_list, default=[2, 3, 4])
    _add_trials(p, k=False)
    _add_output(p)

    p = sub.add_parser("compare", help="run the same simulated rounds on two frames")
    p.add_argument("--frame-a", required=True)
    p.add_argument("--frame-b", required=True)
    p.add_argument("--m", type=positive_int, required=True)
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--k", type=positive_int, required=True)
    _add_trials(p, k=False)
    _add_noise(p)
    _add_output(p)

    p = sub.add_parser("simulate", help="simulated coded rounds on one frame")
    _add_frame_source(p)
    _add_trials(p)
    p.add_argument("--straggler", choices=["random", "fixed", "delay"], default="random")
    p.add_argument("--erased", type=int_list, default=[])
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--deadline", type=float, default=1.0)
    _add_noise(p)
    _add_output(p)
    return parser


# --------------------------------------------------------------------------
# resolution (all validation happens here, before any heavy computation)


def _existing(path: str, flag: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"{flag}: no such file {path!r}")
    return path


def _check_out(path: Optional[str], flag: str) -> None:
    if path:
        parent = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(parent):
            raise UsageError(f"{flag}: directory {parent!r} does not exist")


def _need(args, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required here")


def resolve_frame(args) -> Frame:
    if args.frame:
        if args.family:
            raise UsageError("--frame and --family are mutually exclusive")
        frame = import_frame(_existing(args.frame, "--frame"))
        for flag in ("m", "n"):
            want = getattr(args, flag, None)
            if want is not None and want != getattr(frame, flag):
                raise UsageError(f"--{flag} {want} does not match the frame file ({getattr(frame, flag)})")
        return frame
    if not args.family:
        raise UsageError("give either --frame or --family")
    fam = args.family
    if fam == "harmonic":
        _need(args, "n")
        if args.rows == "qr":
            rows = quadratic_residue_difference_set(args.n)
        elif args.rows:
            rows = int_list(args.rows)
        else:
            _need(args, "m")
            rows = range(args.m)
        return harmonic_frame(args.n, rows)
    _need(args, "n", "m")
    n, m = args.n, args.m
    if fam == "uspc":
        return build_frame(uspc_spec(n, m))
    if fam == "gaussian":
        return random_gaussian_frame(m, n, args.seed)
    if fam == "nuspc":
        _need(args, "b", "r", "y")
        return build_frame(nuspc_spec(NuspcParams(n, m, args.b, args.r, args.y)))
    powers = args.powers
    if powers == "qr":
        z = quadratic_residue_difference_set(n)
        if len(z) != m:
            raise UsageError(f"--powers qr gives {len(z)} powers for n={n}; pass --m {len(z)}")
    elif powers == "ds":
        z = find_difference_set(n, m)
        if z is None:
            raise UnsupportedParameters(f"no ({n}, {m}) difference set exists")
    elif powers == "random":
        rng = trial_rng(args.seed, 0)
        while True:
            z = rng.choice(n, size=m, replace=False).tolist()
            try:
                return build_frame(ncp_spec(n, m, z))
            except InvalidParameters:
                if not 2 <= m <= n - 2:
                    raise
    else:
        try:
            z = int_list(powers)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"--powers: {exc}") from None
    return build_frame(ncp_spec(n, m, z))


def resolve_k(args, n: int) -> int:
    if args.k is not None and args.k_over_n is not None:
        raise UsageError("--k and --k-over-n are mutually exclusive")
    if args.k is not None:
        k = args.k
    elif args.k_over_n is not None:
        if not 0 < args.k_over_n <= 1:
            raise UsageError(f"--k-over-n must lie in (0, 1], got {args.k_over_n}")
        k = int(round(args.k_over_n * n))
    else:
        raise UsageError("--k or --k-over-n is required here")
    if k > n:
        raise UsageError(f"--k {k} exceeds n={n}")
    return k


def resolve_data(args, m: int) -> DataSet:
    if args.data:
        if not args.x:
            raise UsageError("--data needs --x")
        A = load_csv_matrix(_existing(args.data, "--data"))
        x = load_csv_matrix(_existing(args.x, "--x")).ravel()
        return DataSet(A, x)
    h = args.h or 4 * m
    return DataSet.random(h, args.l, args.seed)


def resolve_noise(args) -> NoiseModel:
    if args.noise == "gaussian":
        if not args.sigma >= 0:
            raise UsageError(f"--sigma must be >= 0, got {args.sigma}")
        return NoiseModel.gaussian(args.sigma)
    if args.noise == "round":
        if not 2 <= args.bits <= 52:
            raise UsageError(f"--bits must lie in [2, 52], got {args.bits}")
        return NoiseModel.round_to_bits(args.bits)
    return NoiseModel.none()


# --------------------------------------------------------------------------
# output


def _plain(v):
    if is_dataclass(v) and not isinstance(v, type):
        return {f.name: _plain(getattr(v, f.name)) for f in fields(v)}
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, complex):
        return [v.real, v.imag]
    if hasattr(v, "value") and hasattr(v, "name"):
        return v.value
    return v


def metadata(args, command: str) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "verbose")}
    return {
        "tool": "framecode",
        "version": __version__,
        "command": command,
        "seed": getattr(args, "seed", None),
        "parameters": _plain(params),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def _format(args) -> str:
    if args.format:
        return args.format
    if args.out and args.out.lower().endswith(".csv"):
        return "csv"
    return "json"


def emit(args, meta: dict, payload: dict, table: Optional[List[dict]] = None) -> None:
    """Write ``payload`` as JSON, or ``table`` rows as CSV, with a metadata header."""
    fmt = _format(args) if hasattr(args, "format") else "json"
    if fmt == "csv":
        rows = table if table is not None else [payload]
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        cols = list(rows[0].keys()) if rows else []
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _plain(v) for k, v in row.items()})
        text = buf.getvalue()
    else:
        text = json.dumps({"metadata": meta, **_plain(payload)}, indent=2, sort_keys=False) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> None:
    frame = resolve_frame(args)
    if args.out:
        export_frame(frame, args.out, "npy" if args.out.endswith(".npy") else "frame")
    props = frame_properties(frame)
    payload = {"kind": frame.kind.value, "m": frame.m, "n": frame.n, "gamma": frame.gamma,
               "properties": asdict(props)}
    if frame.spec is not None and hasattr(frame.spec, "powers"):
        payload["powers"] = list(frame.spec.powers)
    text = json.dumps({"metadata": metadata(args, "gen"), **_plain(payload)}, indent=2) + "\n"
    sys.stdout.write(text)


def cmd_spectrum(args) -> None:
    frame = resolve_frame(args)
    k = resolve_k(args, frame.n)
    if k < frame.m:
        raise UsageError(f"--k {k} is below m={frame.m}")
    params = DensityParams.from_counts(frame.m, frame.n, k)
    pooled = []
    for t in range(args.trials):
        ret = sample_retained_set(frame.n, k, trial_rng(args.seed, t))
        pooled.append(analyze_subframe(frame.matrix[:, list(ret.indices)]).eigenvalues)
    ev = np.concatenate(pooled)
    x = ev / ev.mean()
    counts, edges = np.histogram(x, bins=args.bins)
    width = np.diff(edges)
    density = counts / (counts.sum() * width)
    mid = 0.5 * (edges[1:] + edges[:-1])
    table = []
    for i in range(args.bins):
        row = {"bin_lo": edges[i], "bin_hi": edges[i + 1], "density": density[i]}
        for kind in DensityKind:
            law = spectral_law(kind, params)
            scale = law.mean() / law.mass()
            row[f"{kind.value.lower()}_density"] = float(law.cdf(edges[i + 1], scale) - law.cdf(edges[i], scale)) / (
                law.mass() * width[i])
        table.append(row)
    payload = {
        "m": frame.m, "n": frame.n, "k": k, "gamma": params.gamma, "beta": params.beta,
        "eigenvalue_count": int(ev.size),
        "ks_mp": ks_distance_to_density(ev, DensityKind.MP, params),
        "ks_manova": ks_distance_to_density(ev, DensityKind.MANOVA, params),
        "histogram": {"centers": mid, "density": density, "edges": edges},
    }
    emit(args, metadata(args, "spectrum"), payload, table)


def _benchmarks(m: int, n: int, k: int) -> dict:
    params = DensityParams.from_counts(m, n, k)
    return {kind.value.lower() + "_benchmark": theoretical_noise_amp(kind, params) for kind in DensityKind}


def cmd_noiseamp(args) -> None:
    frame = resolve_frame(args)
    k = resolve_k(args, frame.n)
    if k < frame.m:
        raise UsageError(f"--k {k} is below m={frame.m}")
    est = estimate_noise_amp(frame, TrialPlan(args.trials, args.seed, k))
    payload = {"m": frame.m, "n": frame.n, "k": k, "mean": est.mean, "stddev": est.stddev, "max": est.max,
               "fraction_ill_conditioned": est.fraction_ill_conditioned,
               # the 1/k-normalized reading of the amplification, for comparison
               "mean_per_node_normalization": est.mean * frame.m / k,
               **_benchmarks(frame.m, frame.n, k)}
    emit(args, metadata(args, "noiseamp"), payload)


def cmd_search(args) -> None:
    k = resolve_k(args, args.n)
    injected = ()
    if args.inject == "qr":
        z = quadratic_residue_difference_set(args.n)
        if len(z) != args.m or args.family != "ncp":
            raise UsageError("--inject qr needs --family ncp and m = (n-1)/2")
        injected = (ncp_spec(args.n, args.m, z),)
    plan = SearchPlan(FrameKind(args.family.upper()), args.candidates, TrialPlan(args.trials, args.seed, k),
                      b_values=tuple(args.b_values), r_values=tuple(args.r_values) if args.r_values else None,
                      prescreen_trials=args.prescreen, injected=injected)
    res = code_search(plan, args.n, args.m)
    if args.save_best:
        export_frame(res.best_frame, args.save_best, "npy" if args.save_best.endswith(".npy") else "frame")
    table = [{"index": r.index, "label": r.label, "valid": r.valid, "mean": r.estimate.mean,
              "max": r.estimate.max, "stddev": r.estimate.stddev,
              "fraction_ill_conditioned": r.estimate.fraction_ill_conditioned} for r in res.log]
    payload = {"family": plan.family.value, "n": args.n, "m": args.m, "k": k,
               "best_index": res.best.index, "best_label": res.best.label, "best_mean_amp": res.best_mean_amp,
               "best_powers": list(res.best.spec.powers), "valid": res.valid,
               **_benchmarks(args.m, args.n, k), "candidates": table}
    emit(args, metadata(args, "search"), payload, table)


def cmd_sweep(args) -> None:
    fams = []
    for name in args.families.split(","):
        name = name.strip().upper()
        if name not in ("NCP", "NUSPC"):
            raise UsageError(f"--families accepts ncp and nuspc, got {name.lower()!r}")
        fams.append(FrameKind(name))
    if not 0 < args.k_over_n <= 1:
        raise UsageError(f"--k-over-n must lie in (0, 1], got {args.k_over_n}")
    if min(args.inv_gamma) < 1:
        raise UsageError("--inv-gamma values must be >= 1")
    plan = SearchPlan(FrameKind.NCP, args.candidates, TrialPlan(args.trials, args.seed, args.m),
                      b_values=tuple(args.b_values), prescreen_trials=args.prescreen)
    rows = gamma_sweep(args.m, args.inv_gamma, args.k_over_n, plan, fams)
    table = [{"gamma_inv": r.gamma_inv, "family": r.family, "mean_amp": r.mean_amp,
              "mp_benchmark": r.mp_benchmark, "manova_benchmark": r.manova_benchmark,
              "n": r.n, "k": r.k, "max_amp": r.max_amp, "fraction_ill": r.fraction_ill,
              "valid": r.valid, "flag": r.flag} for r in rows]
    emit(args, metadata(args, "sweep"), {"rows": table}, table)


def _simulate(frame: Frame, args, straggler: StragglerModel) -> dict:
    data = resolve_data(args, frame.m)
    res = run_simulation(data, frame, resolve_noise(args), straggler, args.trials, args.seed)
    return res.to_dict()


def cmd_compare(args) -> None:
    frames = {}
    for key, path in (("frame_a", args.frame_a), ("frame_b", args.frame_b)):
        f = import_frame(_existing(path, "--" + key.replace("_", "-")))
        if (f.m, f.n) != (args.m, args.n):
            raise UsageError(f"--{key.replace('_', '-')} is {f.m} x {f.n}, expected --m {args.m} --n {args.n}")
        frames[key] = f
    if not args.m <= args.k <= args.n:
        raise UsageError(f"--k must lie in [m, n] = [{args.m}, {args.n}]")
    resolve_noise(args)
    straggler = StragglerModel.random_k(args.k)
    payload = {"m": args.m, "n": args.n, "k": args.k}
    for key, f in frames.items():
        payload[key] = _simulate(f, args, straggler)
    emit(args, metadata(args, "compare"), payload,
         [{"frame": key, **{k: v for k, v in payload[key].items() if k != "retained_histogram"}}
          for key in frames])


def cmd_simulate(args) -> None:
    frame = resolve_frame(args)
    if args.straggler == "random":
        straggler = StragglerModel.random_k(resolve_k(args, frame.n))
    elif args.straggler == "fixed":
        straggler = StragglerModel.fixed_set(args.erased)
    else:
        straggler = StragglerModel.delay(args.rate, args.deadline)
    straggler.validate(frame.n, frame.m)
    resolve_noise(args)
    payload = {"m": frame.m, "n": frame.n, **_simulate(frame, args, straggler)}
    emit(args, metadata(args, "simulate"), payload)


COMMANDS = {
    "gen": cmd_gen,
    "spectrum": cmd_spectrum,
    "noiseamp": cmd_noiseamp,
    "search": cmd_search,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_out(getattr(args, "out", None), "--out")
        _check_out(getattr(args, "save_best", None), "--save-best")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"framecode {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParameters, UnsupportedParameters, FormatError) as exc:
        print(f"framecode {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FramecodeError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"framecode {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
