"""Simulated coded matrix-vector multiplication rounds.

The master splits ``A`` into ``m`` row blocks, encodes them with the
transpose of a frame into ``n`` node tasks, collects noisy products from the
nodes that beat the stragglers, and decodes by least squares.
"""
from __future__ import annotations

import enum
import os
import weakref
from collections import Counter
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import FormatError, InvalidParameters, Underdetermined
from .frames import Frame, FrameKind
from .parallel import STREAM_SIMULATION, chunks, flatten, ordered_map, trial_rng
from .spectra import RetainedSet, analyze_subframe, require_well_conditioned, subframe
from .montecarlo import sample_retained_set

FRAME_FORMATS = ("frame", "npy")


@dataclass(frozen=True, eq=False)
class DataSet:
    """Real matrix ``A`` (h x l) and vector ``x`` (length l); the target is ``A @ x``."""

    A: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        x = np.array(self.x, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise InvalidParameters(f"A must be a non-empty matrix, got shape {A.shape}")
        if x.size != A.shape[1]:
            raise InvalidParameters(f"x has length {x.size}, A has {A.shape[1]} columns")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(x))):
            raise InvalidParameters("data must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x", x)

    @classmethod
    def random(cls, h: int, l: int, seed: int) -> "DataSet":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((h, l)), rng.standard_normal(l))

    @property
    def truth(self) -> np.ndarray:
        return self.A @ self.x


class NoiseKind(str, enum.Enum):
    NONE = "none"
    ADDITIVE_GAUSSIAN = "gaussian"
    ROUND_TO_BITS = "round"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.NONE
    sigma: float = 0.0
    bits: int = 52

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.kind is NoiseKind.ADDITIVE_GAUSSIAN and not self.sigma >= 0:
            raise InvalidParameters(f"sigma must be >= 0, got {self.sigma}")
        if self.kind is NoiseKind.ROUND_TO_BITS and not 2 <= self.bits <= 52:
            raise InvalidParameters(f"mantissa bits must lie in [2, 52], got {self.bits}")

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseModel":
        return cls(NoiseKind.ADDITIVE_GAUSSIAN, sigma=sigma)

    @classmethod
    def round_to_bits(cls, bits: int) -> "NoiseModel":
        return cls(NoiseKind.ROUND_TO_BITS, bits=bits)


class StragglerKind(str, enum.Enum):
    FIXED_SET = "fixed"
    RANDOM_K = "random"
    DELAY = "delay"


@dataclass(frozen=True)
class StragglerModel:
    kind: StragglerKind
    erased: tuple = ()
    k: int = 0
    rate: float = 1.0
    deadline: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", StragglerKind(self.kind))
        object.__setattr__(self, "erased", tuple(sorted({int(i) for i in self.erased})))
        if self.kind is StragglerKind.DELAY and not (self.rate > 0 and self.deadline > 0):
            raise InvalidParameters("DELAY needs positive rate and deadline")
        if self.kind is StragglerKind.RANDOM_K and self.k < 1:
            raise InvalidParameters(f"RANDOM_K needs k >= 1, got {self.k}")

    @classmethod
    def fixed_set(cls, erased: Sequence[int]) -> "StragglerModel":
        return cls(StragglerKind.FIXED_SET, erased=tuple(erased))

    @classmethod
    def random_k(cls, k: int) -> "StragglerModel":
        return cls(StragglerKind.RANDOM_K, k=k)

    @classmethod
    def delay(cls, rate: float, deadline: float) -> "StragglerModel":
        return cls(StragglerKind.DELAY, rate=rate, deadline=deadline)

    def validate(self, n: int, m: int) -> None:
        if self.kind is StragglerKind.FIXED_SET and self.erased and (self.erased[0] < 0 or self.erased[-1] >= n):
            raise InvalidParameters(f"erased indices must lie in [0, {n - 1}]")
        if self.kind is StragglerKind.RANDOM_K and not m <= self.k <= n:
            raise InvalidParameters(f"RANDOM_K needs m <= k <= n, got m={m}, k={self.k}, n={n}")

    def retained(self, n: int, rng: np.random.Generator) -> RetainedSet:
        if self.kind is StragglerKind.FIXED_SET:
            gone = set(self.erased)
            return RetainedSet(n, tuple(i for i in range(n) if i not in gone))
        if self.kind is StragglerKind.RANDOM_K:
            return sample_retained_set(n, self.k, rng)
        times = rng.exponential(1.0 / self.rate, size=n)
        return RetainedSet(n, tuple(np.flatnonzero(times <= self.deadline).tolist()))


@dataclass(frozen=True)
class SimResult:
    mse: float
    rel_frobenius: float
    kappa_mean: float
    kappa_min: float
    kappa_max: float
    trials: int
    retained_histogram: dict
    failed_decodes: int = 0
    mse_stderr: float = float("nan")
    imag_residue_max: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mse_stderr": self.mse_stderr,
            "rel_frobenius": self.rel_frobenius,
            "kappa_mean": self.kappa_mean,
            "kappa_min": self.kappa_min,
            "kappa_max": self.kappa_max,
            "trials": self.trials,
            "failed_decodes": self.failed_decodes,
            "imag_residue_max": self.imag_residue_max,
            "retained_histogram": {str(k): v for k, v in sorted(self.retained_histogram.items())},
        }


class Decoded(NamedTuple):
    products: np.ndarray  # (m, rows) real
    imag_residue: float
    kappa: float


# --------------------------------------------------------------------------
# round steps


def partition_data(A: np.ndarray, m: int) -> List[np.ndarray]:
    """Split the rows of ``A`` into ``m`` blocks of ``ceil(h/m)`` rows, zero padded."""
    if m < 1:
        raise InvalidParameters(f"m must be positive, got {m}")
    A = np.asarray(A)
    h = A.shape[0]
    rows = -(-h // m)
    padded = np.zeros((rows * m,) + A.shape[1:], dtype=A.dtype)
    padded[:h] = A
    return [padded[j * rows:(j + 1) * rows] for j in range(m)]


def encode_blocks(blocks: Sequence[np.ndarray], frame: Frame) -> List[np.ndarray]:
    """Node ``i`` receives ``sum_j F[j, i] * blocks[j]``."""
    if len(blocks) != frame.m:
        raise InvalidParameters(f"frame encodes {frame.m} blocks, got {len(blocks)}")
    stack = np.stack([np.asarray(b) for b in blocks])
    if stack.ndim < 2:
        raise InvalidParameters("blocks must be arrays")
    enc = np.tensordot(frame.matrix.T, stack, axes=(1, 0))
    return list(enc)


def round_to_bits(v, bits: int):
    """Round to ``bits`` fraction bits of mantissa (real and imaginary parts separately)."""
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return round_to_bits(v.real, bits) + 1j * round_to_bits(v.imag, bits)
    mant, exp = np.frexp(v)
    scale = bits + 1  # frexp mantissa in [0.5, 1) carries the leading bit
    return np.ldexp(np.round(np.ldexp(mant, scale)), exp - scale)


def _noise(shape, sigma: float, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return sigma * (z[..., 0] + 1j * z[..., 1])


def worker_compute(encoded_block: np.ndarray, x: np.ndarray, noise: NoiseModel,
                   rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """One node's product ``encoded_block @ x`` under the computation-noise model."""
    block = np.asarray(encoded_block)
    x = np.asarray(x)
    if block.shape[-1] != x.shape[0]:
        raise InvalidParameters(f"block has {block.shape[-1]} columns, x has length {x.shape[0]}")
    if noise.kind is NoiseKind.ROUND_TO_BITS and noise.bits < 52:
        acc = np.zeros(block.shape[:-1], dtype=np.result_type(block, x))
        for j in range(x.shape[0]):
            acc = round_to_bits(acc + round_to_bits(block[..., j] * x[j], noise.bits), noise.bits)
        return acc
    exact = block @ x
    if noise.kind is NoiseKind.ADDITIVE_GAUSSIAN:
        if rng is None:
            raise InvalidParameters("additive noise needs a random generator")
        return exact + _noise(exact.shape, noise.sigma, rng)
    return exact


_FACTORS: "weakref.WeakKeyDictionary[Frame, dict]" = weakref.WeakKeyDictionary()
_FACTOR_CACHE_LIMIT = 4096


def _factor(frame: Frame, retained: RetainedSet):
    """QR factors of ``F_k^T`` plus the spectrum report, memoized per frame."""
    cache = _FACTORS.setdefault(frame, {})
    hit = cache.get(retained.indices)
    if hit is not None:
        return hit
    sub = subframe(frame, retained)
    report = analyze_subframe(sub)
    factor = None if report.ill_conditioned else np.linalg.qr(sub.T)
    if len(cache) >= _FACTOR_CACHE_LIMIT:
        cache.clear()
    cache[retained.indices] = (factor, report)
    return factor, report


def decode_ls(responses: Sequence[np.ndarray], retained: RetainedSet, frame: Frame) -> Decoded:
    """Least-squares estimate of all ``m`` block products from the retained responses.

    Solves ``min_B || F_k^T B - R ||_F`` by a QR factorization of ``F_k^T``.
    Imaginary parts are measured, reported, and dropped.
    """
    m = frame.m
    if retained.n != frame.n:
        raise InvalidParameters(f"retained set is over {retained.n} nodes, frame has {frame.n}")
    if retained.k < m:
        raise Underdetermined(f"{retained.k} responses cannot determine {m} blocks")
    R = np.asarray(responses)
    if R.shape[0] != retained.k:
        raise InvalidParameters(f"expected {retained.k} responses, got {R.shape[0]}")
    factor, report = _factor(frame, retained)
    require_well_conditioned(report)
    q, r = factor
    flat = R.reshape(retained.k, -1)
    B = solve_triangular(r, q.conj().T @ flat).reshape((m,) + R.shape[1:])
    scale = max(float(np.max(np.abs(B.real))), np.finfo(float).tiny)
    imag = float(np.max(np.abs(B.imag))) / scale
    return Decoded(B.real.copy(), imag, report.kappa_matrix)


# --------------------------------------------------------------------------
# full rounds


def _run_trials(idx: range, frame: Frame, exact: np.ndarray, enc: np.ndarray, data: DataSet, truth_rows: int,
                noise: NoiseModel, straggler: StragglerModel, seed: int) -> list:
    n, m = frame.n, frame.m
    truth = data.truth
    out = []
    for t in idx:
        rng = trial_rng(seed, t, STREAM_SIMULATION)
        retained = straggler.retained(n, rng)
        if retained.k < m:
            out.append((retained.k, None))
            continue
        sel = list(retained.indices)
        if noise.kind is NoiseKind.ROUND_TO_BITS and noise.bits < 52:
            R = np.stack([worker_compute(enc[i], data.x, noise) for i in sel])
        elif noise.kind is NoiseKind.ADDITIVE_GAUSSIAN:
            R = exact[sel] + _noise(exact[sel].shape, noise.sigma, rng)
        else:
            R = exact[sel]
        _, report = _factor(frame, retained)
        if report.ill_conditioned:
            out.append((retained.k, None))
            continue
        dec = decode_ls(R, retained, frame)
        est = dec.products.reshape(-1)[:truth_rows]
        err = est - truth
        tn = np.linalg.norm(truth)
        rel = float(np.linalg.norm(err) / tn) if tn > 0 else float(np.linalg.norm(err))
        out.append((retained.k, (float(np.mean(err ** 2)), rel, dec.kappa, dec.imag_residue)))
    return out


def run_simulation(data: DataSet, frame: Frame, noise: NoiseModel, straggler: StragglerModel,
                   trials: int, seed: int, threads: Optional[int] = None) -> SimResult:
    """Repeat a full coded round ``trials`` times and aggregate Table-1 style metrics.

    Trials whose straggler draw leaves fewer than ``m`` nodes, or a singular
    sub-frame, count as failed decodes and are left out of the error metrics.
    """
    if trials < 1:
        raise InvalidParameters(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise InvalidParameters(f"seed must be non-negative, got {seed}")
    straggler.validate(frame.n, frame.m)
    blocks = partition_data(data.A, frame.m)
    enc = np.stack(encode_blocks(blocks, frame))
    exact = np.stack([worker_compute(e, data.x, NoiseModel.none()) for e in enc])
    h = data.A.shape[0]
    parts = ordered_map(
        lambda r: _run_trials(r, frame, exact, enc, data, h, noise, straggler, seed),
        chunks(trials, 256), threads)
    results = flatten(parts)
    hist = Counter(k for k, _ in results)
    ok = [res for _, res in results if res is not None]
    failed = trials - len(ok)
    if not ok:
        nan = float("nan")
        return SimResult(nan, nan, nan, nan, nan, trials, dict(hist), failed)
    mse = np.array([r[0] for r in ok])
    rel = np.array([r[1] for r in ok])
    kap = np.array([r[2] for r in ok])
    imag = max(r[3] for r in ok)
    stderr = float(np.std(mse) / np.sqrt(mse.size)) if mse.size > 1 else float("nan")
    return SimResult(
        mse=float(np.mean(mse)),
        rel_frobenius=float(np.mean(rel)),
        kappa_mean=float(np.mean(kap)),
        kappa_min=float(np.min(kap)),
        kappa_max=float(np.max(kap)),
        trials=trials,
        retained_histogram=dict(sorted(hist.items())),
        failed_decodes=failed,
        mse_stderr=stderr,
        imag_residue_max=float(imag),
    )


# --------------------------------------------------------------------------
# files


def export_frame(frame: Frame, path, format: str = "frame") -> None:
    """Write ``m n`` then one ``re im`` line per entry in column-major order."""
    if format == "npy":
        np.save(path, np.asarray(frame.matrix))
        return
    if format != "frame":
        raise InvalidParameters(f"unknown frame format {format!r}; expected one of {FRAME_FORMATS}")
    F = frame.matrix
    lines = [f"{F.shape[0]} {F.shape[1]}"]
    lines += [f"{v.real:.17g} {v.imag:.17g}" for v in F.T.ravel()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_frame_text(text: str) -> np.ndarray:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty frame file")
    try:
        m, n = (int(v) for v in lines[0])
    except ValueError:
        raise FormatError(f"bad header {' '.join(lines[0])!r}; expected 'm n'") from None
    if m < 1 or n < 1:
        raise FormatError(f"bad dimensions {m} x {n}")
    body = lines[1:]
    if len(body) != m * n:
        raise FormatError(f"header declares {m * n} entries, file has {len(body)}")
    try:
        vals = np.array([[float(a), float(b)] for a, b in body])
    except ValueError:
        raise FormatError("every entry line must hold two numbers 're im'") from None
    return (vals[:, 0] + 1j * vals[:, 1]).reshape(n, m).T


def import_frame(path, format: Optional[str] = None) -> Frame:
    """Load an ``m x n`` complex matrix and normalize its columns."""
    if format is None:
        format = "npy" if os.fspath(path).endswith(".npy") else "frame"
    if format == "npy":
        try:
            raw = np.load(path, allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise FormatError(str(exc)) from None
        if raw.ndim != 2:
            raise FormatError(f"expected a 2-D array, got shape {raw.shape}")
    elif format == "frame":
        with open(path, encoding="utf-8") as fh:
            raw = _parse_frame_text(fh.read())
    else:
        raise InvalidParameters(f"unknown frame format {format!r}; expected one of {FRAME_FORMATS}")
    raw = np.asarray(raw, dtype=np.complex128)
    if not np.all(np.isfinite(raw)):
        raise FormatError("frame has non-finite entries")
    norms = np.linalg.norm(raw, axis=0)
    if np.any(norms == 0):
        raise FormatError(f"frame has zero columns at {np.flatnonzero(norms == 0).tolist()}")
    return Frame.from_columns(raw, FrameKind.IMPORTED, None, source=os.fspath(path))


def load_csv_matrix(path) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return arr
