"""Frame constructions: polynomial codes over the unit circle, random and
harmonic frames, difference sets, and frame property checks.

A frame is stored as an ``m x n`` complex matrix whose columns are the frame
vectors. The code generator used for encoding is its transpose.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidParameters, RejectedAsUSPC, UnsupportedParameters

# Sample points closer than this (in radians on the circle, or absolute
# distance off it) are treated as equal.
SAMPLE_TOL = 1e-12
STRUCTURE_TOL = 1e-9

ComplexMatrix = np.ndarray


def as_complex_matrix(a) -> ComplexMatrix:
    """Validate and freeze a dense complex matrix (2-D, non-empty, finite)."""
    arr = np.array(a, dtype=np.complex128, copy=True)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidParameters(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameters("matrix has non-finite entries")
    arr.setflags(write=False)
    return arr


class FrameKind(str, enum.Enum):
    USPC = "USPC"
    NUSPC = "NUSPC"
    NCP = "NCP"
    GAUSSIAN = "GAUSSIAN"
    HARMONIC = "HARMONIC"
    IMPORTED = "IMPORTED"


def _unit_roots(n: int, numerators: Sequence[int], denominator: Optional[int] = None) -> np.ndarray:
    # exp(2*pi*i*a/d) with a reduced mod d first, so large integers keep full precision
    d = n if denominator is None else denominator
    a = np.mod(np.asarray(numerators, dtype=np.int64), d)
    return np.exp(2j * np.pi * a / d)


@dataclass(frozen=True, eq=False)
class PolynomialCodeSpec:
    """Sample points ``samples`` (n of them) and powers ``powers`` (m of them).

    The generator has entries ``samples[i] ** powers[j]``. ``family`` is a
    construction tag and is inferred by :func:`build_frame` when left empty.
    """

    n: int
    m: int
    samples: np.ndarray
    powers: tuple
    family: Optional[FrameKind] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128).ravel()
        powers = tuple(int(p) for p in self.powers)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "powers", powers)
        samples.setflags(write=False)
        n, m = self.n, self.m
        if n < 1 or m < 1 or m > n:
            raise InvalidParameters(f"need 1 <= m <= n, got n={n}, m={m}")
        if samples.size != n:
            raise InvalidParameters(f"expected {n} samples, got {samples.size}")
        if len(powers) != m:
            raise InvalidParameters(f"expected {m} powers, got {len(powers)}")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameters("samples must be finite")
        if np.any(np.abs(samples) < SAMPLE_TOL):
            raise InvalidParameters("0 is not allowed as a sample point")
        if len(set(powers)) != m or min(powers) < 0 or max(powers) > n - 1:
            raise InvalidParameters(f"powers must be {m} distinct integers in [0, {n - 1}]")
        if n > 1:
            gaps = np.abs(samples[:, None] - samples[None, :])
            gaps[np.diag_indices(n)] = np.inf
            if gaps.min() < SAMPLE_TOL:
                raise InvalidParameters("sample points must be pairwise distinct")

    @property
    def unit_modulus(self) -> bool:
        return bool(np.allclose(np.abs(self.samples), 1.0, rtol=0, atol=SAMPLE_TOL))


@dataclass(frozen=True)
class NuspcParams:
    n: int
    m: int
    b: int
    r: int
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        if self.b < 1 or self.r < 1:
            raise InvalidParameters("b and r must be positive")
        if self.n % self.r:
            raise InvalidParameters(f"r={self.r} does not divide n={self.n}")
        if len(self.y) != self.r or len(set(self.y)) != self.r:
            raise InvalidParameters(f"y must hold r={self.r} distinct offsets")
        if min(self.y) < 0 or max(self.y) > self.r * self.b - 1:
            raise InvalidParameters(f"offsets must lie in [0, {self.r * self.b - 1}]")


@dataclass(frozen=True, eq=False)
class Frame:
    matrix: ComplexMatrix
    kind: FrameKind
    spec: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = as_complex_matrix(self.matrix)
        norms = np.linalg.norm(mat, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise InvalidParameters("frame columns must have unit norm")
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def gamma(self) -> float:
        return self.m / self.n

    @classmethod
    def from_columns(cls, matrix, kind: FrameKind, spec=None, **meta) -> "Frame":
        """Normalize every column of ``matrix`` to unit norm and wrap it."""
        mat = np.array(matrix, dtype=np.complex128)
        if mat.ndim != 2:
            raise InvalidParameters(f"expected a 2-D matrix, got shape {mat.shape}")
        norms = np.linalg.norm(mat, axis=0)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise InvalidParameters("cannot normalize a zero or non-finite column")
        return cls(mat / norms, kind, spec, dict(meta))


@dataclass(frozen=True)
class FramePropertyReport:
    unit_norm: bool
    tight: bool
    tight_bound: float
    equiangular: bool
    max_cross_correlation: float
    welch_bound: float


# --------------------------------------------------------------------------
# polynomial code specs


def uspc_spec(n: int, m: int) -> PolynomialCodeSpec:
    """Uniform samples ``exp(2 pi i j / n)`` with powers ``0..m-1``."""
    if not 1 <= m <= n:
        raise InvalidParameters(f"need 1 <= m <= n, got n={n}, m={m}")
    return PolynomialCodeSpec(n, m, _unit_roots(n, range(n)), tuple(range(m)), FrameKind.USPC)


def nuspc_spec(p: NuspcParams) -> PolynomialCodeSpec:
    """Non-uniform unit-circle samples built from ``n/r`` shifted copies of
    the offset pattern ``y`` on a grid refined by ``b``.

    Sample angles are ``2 pi (y_j + r b alpha) / (b n)`` for
    ``alpha = 0..n/r - 1``; the result is sorted by angle.
    """
    if not 1 <= p.m <= p.n:
        raise InvalidParameters(f"need 1 <= m <= n, got n={p.n}, m={p.m}")
    denom = p.b * p.n
    alpha = np.arange(p.n // p.r)
    numer = (np.asarray(p.y)[:, None] + p.r * p.b * alpha[None, :]).ravel()
    numer = np.sort(np.mod(numer, denom))
    if np.unique(numer).size != p.n:
        raise InvalidParameters("NUSPC parameters produce duplicate sample points")
    return PolynomialCodeSpec(p.n, p.m, _unit_roots(p.n, numer, denom), tuple(range(p.m)), FrameKind.NUSPC)


def is_cyclically_consecutive(z: Iterable[int], n: int) -> bool:
    """True when ``z`` is a run ``c, c+1, ..., c+len-1`` taken mod ``n``."""
    zs = sorted({int(v) % n for v in z})
    if not zs:
        return False
    if len(zs) == n:
        return True
    # a cyclic run has exactly one gap larger than 1 between neighbours
    gaps = np.diff(zs + [zs[0] + n])
    return int(np.sum(gaps > 1)) == 1


def ncp_spec(n: int, m: int, z: Iterable[int]) -> PolynomialCodeSpec:
    """Uniform samples with a non-consecutive power set ``z``."""
    z = tuple(sorted(int(v) for v in z))
    if len(z) != m or len(set(z)) != m:
        raise InvalidParameters(f"power set must have {m} distinct members, got {len(set(z))}")
    if min(z) < 0 or max(z) > n - 1:
        raise InvalidParameters(f"powers must lie in [0, {n - 1}]")
    if is_cyclically_consecutive(z, n):
        raise RejectedAsUSPC(f"powers {z} are cyclically consecutive mod {n}; this is a USPC")
    return PolynomialCodeSpec(n, m, _unit_roots(n, range(n)), z, FrameKind.NCP)


def _infer_family(spec: PolynomialCodeSpec) -> FrameKind:
    uniform = np.allclose(spec.samples, _unit_roots(spec.n, range(spec.n)), rtol=0, atol=SAMPLE_TOL)
    if uniform:
        return FrameKind.USPC if is_cyclically_consecutive(spec.powers, spec.n) else FrameKind.NCP
    return FrameKind.NUSPC


def generator_powers(spec: PolynomialCodeSpec) -> np.ndarray:
    """The raw ``m x n`` matrix with entry ``(j, i) = samples[i] ** powers[j]``."""
    s = spec.samples
    z = np.asarray(spec.powers)
    if spec.unit_modulus:
        # exact angle multiplication is more accurate than repeated products
        return np.exp(1j * np.outer(z, np.angle(s)))
    return np.power.outer(s, z).T


def build_frame(spec: PolynomialCodeSpec) -> Frame:
    family = spec.family or _infer_family(spec)
    if spec.unit_modulus and family in (FrameKind.USPC, FrameKind.NCP):
        # uniform samples: s_i^z = exp(2 pi i (i z mod n) / n)
        raw = _unit_roots(spec.n, np.outer(spec.powers, np.arange(spec.n)))
    else:
        raw = generator_powers(spec)
    return Frame.from_columns(raw, family, spec)


# --------------------------------------------------------------------------
# other frames


def random_gaussian_frame(m: int, n: int, seed: int) -> Frame:
    """i.i.d. real Gaussian entries, columns scaled to unit norm."""
    if not 1 <= m <= n:
        raise InvalidParameters(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    return Frame.from_columns(rng.standard_normal((m, n)), FrameKind.GAUSSIAN, None, seed=seed)


def harmonic_frame(n: int, rows: Iterable[int]) -> Frame:
    """Rows ``rows`` of the n-point DFT matrix (``exp(+2 pi i r c / n)``)."""
    rows = tuple(int(r) for r in rows)
    if not rows or len(set(rows)) != len(rows):
        raise InvalidParameters("rows must be a non-empty set of distinct indices")
    if min(rows) < 0 or max(rows) > n - 1:
        raise InvalidParameters(f"row indices must lie in [0, {n - 1}]")
    raw = _unit_roots(n, np.outer(rows, np.arange(n)))
    return Frame.from_columns(raw, FrameKind.HARMONIC, None, rows=rows, n=n)


# --------------------------------------------------------------------------
# difference sets


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n ** 0.5) + 1))


def quadratic_residue_difference_set(n: int) -> tuple:
    """Nonzero quadratic residues mod a prime ``n = 3 (mod 4)``.

    These form a Paley difference set with parameters
    ``(n, (n-1)/2, (n-3)/4)``.
    """
    if not _is_prime(n) or n % 4 != 3:
        raise UnsupportedParameters(f"quadratic-residue difference sets need a prime n = 3 mod 4, got {n}")
    return tuple(sorted({(i * i) % n for i in range(1, n)}))


def difference_counts(z: Iterable[int], n: int) -> np.ndarray:
    """How often each residue 0..n-1 occurs among ordered differences ``a - b``, ``a != b``."""
    z = np.asarray(sorted({int(v) % n for v in z}))
    diffs = np.mod(z[:, None] - z[None, :], n)
    counts = np.bincount(diffs.ravel(), minlength=n)
    counts[0] -= z.size
    return counts


def is_difference_set(z: Iterable[int], n: int) -> bool:
    z = list(z)
    m = len(set(z))
    if m == 0 or n < 2:
        return False
    counts = difference_counts(z, n)[1:]
    lam, rem = divmod(m * (m - 1), n - 1)
    return rem == 0 and bool(np.all(counts == lam))


def find_difference_set(n: int, m: int) -> Optional[tuple]:
    """Exhaustive backtracking search for an ``(n, m, lambda)`` difference set.

    Restricted to ``n <= 40``; returns None when none exists.
    """
    if n > 40:
        raise UnsupportedParameters("exhaustive difference-set search is limited to n <= 40")
    if not 1 <= m <= n:
        raise InvalidParameters(f"need 1 <= m <= n, got n={n}, m={m}")
    if n == 1 or m == 1:
        return (0,)
    lam, rem = divmod(m * (m - 1), n - 1)
    if rem:
        return None

    counts = np.zeros(n, dtype=int)

    def extend(chosen, start):
        if len(chosen) == m:
            return tuple(chosen)
        for c in range(start, n - (m - len(chosen)) + 1):
            d = [(c - a) % n for a in chosen] + [(a - c) % n for a in chosen]
            for v in d:
                counts[v] += 1
            if all(counts[v] <= lam for v in d):
                found = extend(chosen + [c], c + 1)
                if found:
                    return found
            for v in d:
                counts[v] -= 1
        return None

    # every difference set has a translate containing 0
    return extend([0], 1)


# --------------------------------------------------------------------------
# properties


def welch_bound(m: int, n: int) -> float:
    if n <= m:
        return 0.0
    return float(np.sqrt((n - m) / (m * (n - 1))))


def frame_properties(frame: Frame, tol: float = STRUCTURE_TOL) -> FramePropertyReport:
    if tol <= 0:
        raise InvalidParameters("tol must be positive")
    F = frame.matrix
    m, n = F.shape
    unit_norm = bool(np.max(np.abs(np.linalg.norm(F, axis=0) - 1.0)) <= tol)
    op = F @ F.conj().T
    c = float(np.real(np.trace(op)) / m)
    tight = bool(np.max(np.abs(op - c * np.eye(m))) <= tol)
    if n > 1:
        cross = np.abs(F.conj().T @ F)[~np.eye(n, dtype=bool)]
        mcc = float(cross.max())
        equiangular = bool(cross.max() - cross.min() <= tol)
    else:
        mcc, equiangular = 0.0, True
    return FramePropertyReport(
        unit_norm=unit_norm,
        tight=tight,
        tight_bound=c if tight else float("nan"),
        equiangular=equiangular,
        max_cross_correlation=mcc,
        welch_bound=welch_bound(m, n),
    )

