"""Sub-frame eigen-analysis and the random-matrix benchmarks.

Spectra are always taken on the ``m x m`` operator ``F_k F_k^*`` of a
retained sub-frame. Its eigenvalues have mean ``k/m = 1/beta``; the
benchmark laws below are expressed in the unit-mean variable
``x = beta * lambda``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Union

import numpy as np

from .errors import IllConditioned, InvalidParameters, Underdetermined
from .frames import ComplexMatrix, Frame

# eigenvalues below EPS_SING * lambda_max count as zero
EPS_SING = 1e-12


class DensityKind(str, enum.Enum):
    MP = "MP"
    MANOVA = "MANOVA"


@dataclass(frozen=True)
class RetainedSet:
    n: int
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidParameters("retained indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise InvalidParameters(f"retained indices must lie in [0, {self.n - 1}]")

    @property
    def k(self) -> int:
        return len(self.indices)

    @classmethod
    def of(cls, n: int, indices: Iterable[int]) -> "RetainedSet":
        return cls(n, tuple(sorted(int(i) for i in indices)))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    noise_amp: float
    kappa_matrix: float
    kappa_gram: float
    ill_conditioned: bool

    @property
    def m(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class DensityParams:
    """``gamma = m/n`` and ``beta = m/k``."""

    gamma: float
    beta: float

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.beta <= 1):
            raise InvalidParameters(f"need gamma, beta in (0, 1], got {self.gamma}, {self.beta}")
        if self.beta < self.gamma * (1 - 1e-12):
            raise InvalidParameters(f"beta={self.beta} < gamma={self.gamma} implies k > n")

    @classmethod
    def from_counts(cls, m: int, n: int, k: int) -> "DensityParams":
        return cls(m / n, m / k)


# --------------------------------------------------------------------------
# sub-frames


def subframe(frame: Union[Frame, np.ndarray], retained: RetainedSet) -> ComplexMatrix:
    F = frame.matrix if isinstance(frame, Frame) else np.asarray(frame)
    if retained.n != F.shape[1]:
        raise InvalidParameters(f"retained set is over {retained.n} nodes, frame has {F.shape[1]}")
    return F[:, list(retained.indices)]


def analyze_subframe(sub: np.ndarray) -> SpectrumReport:
    sub = np.asarray(sub)
    m, k = sub.shape
    if k < m:
        raise Underdetermined(f"{k} retained columns cannot determine {m} blocks")
    op = sub @ sub.conj().T
    ev = np.linalg.eigvalsh(op)
    lo, hi = ev[0], ev[-1]
    ill = bool(hi <= 0 or lo < EPS_SING * hi)
    kappa_gram = float(hi / lo) if lo > 0 else float("inf")
    ev = np.ascontiguousarray(ev)
    ev.setflags(write=False)
    return SpectrumReport(
        eigenvalues=ev,
        noise_amp=float("inf") if ill else float(np.mean(1.0 / ev)),
        kappa_matrix=float(np.sqrt(kappa_gram)),
        kappa_gram=kappa_gram,
        ill_conditioned=ill,
    )


def require_well_conditioned(report: SpectrumReport) -> None:
    if report.ill_conditioned:
        raise IllConditioned(f"sub-frame is singular to working precision (kappa={report.kappa_matrix:.3g})",
                             report.kappa_matrix)


# --------------------------------------------------------------------------
# densities


def _check_unit(name: str, v: float) -> None:
    if not 0 < v <= 1:
        raise InvalidParameters(f"{name} must lie in (0, 1], got {v}")


def mp_edges(beta: float) -> tuple:
    _check_unit("beta", beta)
    s = np.sqrt(beta)
    return (1 - s) ** 2, (1 + s) ** 2


def mp_density(x, beta: float):
    """Marchenko-Pastur density with ratio ``beta``; zero off the support."""
    lo, hi = mp_edges(beta)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    out[inside] = np.sqrt((xi - lo) * (hi - xi)) / (2 * np.pi * beta * xi)
    return out if out.ndim else float(out)


def _manova_raw_edges(gamma: float, beta: float) -> tuple:
    a = np.sqrt(1 - gamma * beta)
    b = np.sqrt((1 - gamma) * beta)
    return (a - b) ** 2, (a + b) ** 2


def manova_edges(gamma: float, beta: float) -> tuple:
    _check_unit("gamma", gamma)
    _check_unit("beta", beta)
    if gamma > beta:
        raise InvalidParameters(f"MANOVA needs gamma <= beta, got {gamma} > {beta}")
    return _manova_raw_edges(gamma, beta)


def _manova_raw(x: np.ndarray, gamma: float, beta: float) -> np.ndarray:
    lo, hi = _manova_raw_edges(gamma, beta)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    out[inside] = np.sqrt((xi - lo) * (hi - xi)) / (2 * np.pi * beta * xi * (1 - gamma * xi))
    return out


def manova_density(x, gamma: float, beta: float):
    """MANOVA (Wachter) density with edges ``(sqrt(1-gamma beta) +- sqrt((1-gamma) beta))**2``."""
    manova_edges(gamma, beta)
    x = np.asarray(x, dtype=float)
    out = _manova_raw(x, gamma, beta)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# spectral laws of a random sub-frame, in the unit-mean variable


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class SpectralLaw:
    """A density on ``(lo, hi)`` plus an optional point mass ``atom_mass`` at ``atom_at``.

    ``pdf_theta(theta)`` returns density times ``dx/dtheta`` under
    ``x = lo + (hi - lo) sin(theta)**2``, which removes square-root edges.
    """

    lo: float
    hi: float
    pdf_theta: Callable[[np.ndarray], np.ndarray]
    atom_at: float = 0.0
    atom_mass: float = 0.0

    def x_of(self, theta):
        return self.lo + (self.hi - self.lo) * np.sin(theta) ** 2

    def theta_of(self, x):
        if self.hi <= self.lo:
            return np.zeros_like(np.asarray(x, dtype=float))
        u = np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return np.arcsin(np.sqrt(u))

    def _panel_integral(self, g, panels: int) -> float:
        edges = np.linspace(0.0, np.pi / 2, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        theta = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        return float(np.sum(w * self.pdf_theta(theta) * g(self.x_of(theta))))

    def expect(self, g, rtol: float = 1e-8) -> float:
        """``E[g(x)]`` by composite Gauss-Legendre, doubling panels until stable."""
        panels = 8
        prev = self._panel_integral(g, panels)
        while panels < 2 ** 16:
            panels *= 2
            cur = self._panel_integral(g, panels)
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
                prev = cur
                break
            prev = cur
        if self.atom_mass:
            prev += self.atom_mass * float(g(np.array([self.atom_at]))[0])
        return prev

    def mass(self) -> float:
        return self.expect(np.ones_like)

    def mean(self) -> float:
        return self.expect(lambda x: x)

    def cdf_table(self, panels: int = 4096):
        """Continuous-part CDF tabulated on a uniform theta grid."""
        edges = np.linspace(0.0, np.pi / 2, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        theta = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        per_panel = np.sum(half[:, None] * _GL_WEIGHTS[None, :] * self.pdf_theta(theta.ravel()).reshape(theta.shape),
                           axis=1)
        return edges, np.concatenate([[0.0], np.cumsum(per_panel)])

    def cdf(self, x, scale: float = 1.0):
        """CDF of ``scale * X`` evaluated at ``x``."""
        edges, table = self.cdf_table()
        x = np.asarray(x, dtype=float) / scale
        out = np.interp(self.theta_of(x), edges, table)
        out = np.where(x <= self.lo, 0.0, out)
        out = np.where(x >= self.hi, table[-1], out)
        if self.atom_mass:
            out = out + np.where(x >= self.atom_at, self.atom_mass, 0.0)
        return np.clip(out, 0.0, 1.0)


def _mp_law(beta: float) -> SpectralLaw:
    lo, hi = mp_edges(beta)
    width = hi - lo

    def pdf_theta(theta):
        s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
        x = lo + width * s2
        # sqrt((x-lo)(hi-x)) dx/dtheta = 2 width^2 s^2 c^2
        return 2 * width ** 2 * s2 * c2 / (2 * np.pi * beta * x)

    return SpectralLaw(lo, hi, pdf_theta)


def _manova_law(gamma: float, beta: float) -> SpectralLaw:
    """Law of ``beta * lambda(F_k F_k^*)`` for a random k-subset of a tight frame.

    Evaluated with the Wachter formula at ``(k/n, m/k)``; when ``m > n - k``
    the part ``1 - (n-k)/m`` sits as an atom at ``n/k``.
    """
    retain = gamma / beta  # k/n
    if retain >= 1 - 1e-12:
        # k = n: a tight frame keeps every eigenvalue at n/m
        return SpectralLaw(1.0, 1.0, np.zeros_like, atom_at=1.0, atom_mass=1.0)
    lo, hi = _manova_raw_edges(retain, beta)
    width = hi - lo
    gap = 1 - retain * hi  # 1 - retain*x = gap + retain*width*cos^2

    def pdf_theta(theta):
        s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
        x = lo + width * s2
        return 2 * width ** 2 * s2 * c2 / (2 * np.pi * beta * x * (gap + retain * width * c2))

    atom = max(0.0, 1.0 - (1 - retain) / gamma)
    return SpectralLaw(lo, hi, pdf_theta, atom_at=1 / retain, atom_mass=atom)


@lru_cache(maxsize=256)
def spectral_law(kind: DensityKind, params: DensityParams) -> SpectralLaw:
    kind = DensityKind(kind)
    if kind is DensityKind.MP:
        return _mp_law(params.beta)
    return _manova_law(params.gamma, params.beta)


def theoretical_noise_amp(kind: DensityKind, params: DensityParams) -> float:
    """Asymptotic mean noise amplification ``beta * E[x] * E[1/x]`` under the
    chosen law; the density is rescaled so eigenvalues have mean ``k/m``."""
    if params.beta >= 1:
        return float("inf")
    law = spectral_law(DensityKind(kind), params)
    mass = law.mass()
    mean = law.mean() / mass
    inv_mean = law.expect(lambda x: 1.0 / x) / mass
    return float(params.beta * mean * inv_mean)


def ks_distance_to_density(eigen_samples, kind: DensityKind, params: DensityParams) -> float:
    """Kolmogorov-Smirnov distance after normalizing samples and law to unit mean."""
    x = np.sort(np.asarray(eigen_samples, dtype=float).ravel())
    if x.size == 0:
        raise InvalidParameters("need at least one eigenvalue sample")
    mu = x.mean()
    if mu <= 0:
        raise InvalidParameters("eigenvalue samples must have a positive mean")
    x = x / mu
    law = spectral_law(DensityKind(kind), params)
    cdf = law.cdf(x, scale=law.mean() / law.mass()) / law.mass()
    n = x.size
    upper = np.arange(1, n + 1) / n
    return float(max(np.max(upper - cdf), np.max(cdf - (upper - 1.0 / n))))
