"""Random erasure sampling, Monte-Carlo noise-amplification estimates and
best-of-N code search."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidParameters, Underdetermined
from .frames import (
    Frame,
    FrameKind,
    NuspcParams,
    PolynomialCodeSpec,
    build_frame,
    is_cyclically_consecutive,
    ncp_spec,
    nuspc_spec,
    uspc_spec,
)
from .parallel import (
    STREAM_CANDIDATES,
    STREAM_PRESCREEN,
    STREAM_TRIALS,
    chunks,
    flatten,
    ordered_map,
    trial_rng,
)
from .spectra import DensityKind, DensityParams, RetainedSet, analyze_subframe, theoretical_noise_amp

log = logging.getLogger(__name__)

CHUNK = 64


@dataclass(frozen=True)
class TrialPlan:
    trials: int
    seed: int
    k: int

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameters(f"trials must be >= 1, got {self.trials}")
        if self.k < 1:
            raise InvalidParameters(f"k must be >= 1, got {self.k}")
        if self.seed < 0:
            raise InvalidParameters(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class SearchPlan:
    """Best-of-``candidates`` search over one code family.

    ``b_values`` and ``r_values`` bound the NUSPC sampler (``r_values=None``
    means every divisor of n above 1). ``injected`` specs are evaluated first,
    ahead of the sampled candidates.
    """

    family: FrameKind
    candidates: int
    trial_plan: TrialPlan
    b_values: tuple = (2, 3, 4)
    r_values: Optional[tuple] = None
    prescreen_trials: int = 50
    injected: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "family", FrameKind(self.family))
        if self.candidates < 1:
            raise InvalidParameters(f"candidates must be >= 1, got {self.candidates}")
        if self.family not in (FrameKind.USPC, FrameKind.NUSPC, FrameKind.NCP):
            raise InvalidParameters(f"cannot search family {self.family.value}")
        if not self.b_values or min(self.b_values) < 1:
            raise InvalidParameters("b_values must be positive integers")


@dataclass(frozen=True)
class NoiseAmpEstimate:
    mean: float
    stddev: float
    max: float
    fraction_ill_conditioned: float
    trials: int

    @property
    def stderr(self) -> float:
        good = round(self.trials * (1 - self.fraction_ill_conditioned))
        return self.stddev / math.sqrt(good) if good else float("inf")

    def as_tuple(self) -> tuple:
        return self.mean, self.stddev, self.max, self.fraction_ill_conditioned


@dataclass(frozen=True)
class CandidateRecord:
    index: int
    spec: PolynomialCodeSpec
    estimate: NoiseAmpEstimate
    valid: bool
    label: str

    @property
    def mean(self) -> float:
        return self.estimate.mean


@dataclass(frozen=True)
class SearchResult:
    best_frame: Frame
    best_mean_amp: float
    log: List[CandidateRecord] = field(repr=False)
    valid: bool = True

    @property
    def best(self) -> CandidateRecord:
        return next(r for r in self.log if r.spec is self.best_frame.spec)


def sample_retained_set(n: int, k: int, rng: np.random.Generator) -> RetainedSet:
    """Uniformly random k-subset of ``range(n)``."""
    if not 1 <= k <= n:
        raise InvalidParameters(f"need 1 <= k <= n, got k={k}, n={n}")
    if k == n:
        return RetainedSet(n, tuple(range(n)))
    return RetainedSet(n, tuple(np.sort(rng.choice(n, size=k, replace=False)).tolist()))


def _trial_amps(F: np.ndarray, k: int, seed: int, stream: int, idx: range) -> list:
    n = F.shape[1]
    out = []
    for t in idx:
        retained = sample_retained_set(n, k, trial_rng(seed, t, stream))
        out.append(analyze_subframe(F[:, list(retained.indices)]).noise_amp)
    return out


def estimate_noise_amp(frame: Frame, plan: TrialPlan, threads: Optional[int] = None,
                       _stream: int = STREAM_TRIALS) -> NoiseAmpEstimate:
    """Mean, spread and maximum of the noise amplification over random erasures.

    Ill-conditioned draws are excluded from the statistics and reported as
    a fraction.
    """
    m, n = frame.matrix.shape
    if plan.k > n:
        raise InvalidParameters(f"k={plan.k} exceeds n={n}")
    if plan.k < m:
        raise Underdetermined(f"k={plan.k} < m={m}")
    F = frame.matrix
    parts = ordered_map(lambda r: _trial_amps(F, plan.k, plan.seed, _stream, r),
                        chunks(plan.trials, CHUNK), threads)
    amps = np.asarray(flatten(parts))
    good = amps[np.isfinite(amps)]
    frac_ill = 1.0 - good.size / amps.size
    if good.size == 0:
        return NoiseAmpEstimate(float("inf"), float("nan"), float("inf"), frac_ill, plan.trials)
    return NoiseAmpEstimate(float(np.mean(good)), float(np.std(good)), float(np.max(good)),
                            frac_ill, plan.trials)


# --------------------------------------------------------------------------
# candidate samplers


def _divisors(n: int) -> tuple:
    return tuple(d for d in range(2, n + 1) if n % d == 0)


def _check_family(family: FrameKind, n: int, m: int) -> None:
    if not 1 <= m <= n:
        raise InvalidParameters(f"need 1 <= m <= n, got n={n}, m={m}")
    if family is FrameKind.NCP and not 2 <= m <= n - 2:
        raise InvalidParameters(f"no non-consecutive power set of size {m} exists mod {n}")
    if family is FrameKind.NUSPC and n < 2:
        raise InvalidParameters("NUSPC needs n >= 2")


def _sample_candidate(plan: SearchPlan, n: int, m: int, rng: np.random.Generator):
    if plan.family is FrameKind.USPC:
        c = int(rng.integers(n))
        powers = tuple(sorted((c + j) % n for j in range(m)))
        base = uspc_spec(n, m)
        return PolynomialCodeSpec(n, m, base.samples, powers, FrameKind.USPC), f"powers={c}..{c + m - 1} mod {n}"
    if plan.family is FrameKind.NCP:
        while True:
            z = np.sort(rng.choice(n, size=m, replace=False)).tolist()
            if not is_cyclically_consecutive(z, n):
                return ncp_spec(n, m, z), "powers=" + ",".join(map(str, z))
    r_values = plan.r_values or _divisors(n)
    r_values = [r for r in r_values if n % r == 0]
    if not r_values:
        raise InvalidParameters(f"no admissible r divides n={n}")
    r = int(r_values[rng.integers(len(r_values))])
    b = int(plan.b_values[rng.integers(len(plan.b_values))])
    y = np.sort(rng.choice(r * b, size=r, replace=False)).tolist()
    return nuspc_spec(NuspcParams(n, m, b, r, y)), f"b={b} r={r} y=" + ",".join(map(str, y))


def _describe(spec: PolynomialCodeSpec) -> str:
    return "injected powers=" + ",".join(map(str, spec.powers))


def code_search(plan: SearchPlan, n: int, m: int, threads: Optional[int] = None) -> SearchResult:
    """Best of ``plan.candidates`` codes of one family by mean noise amplification.

    A candidate is valid when a prescreen of ``plan.prescreen_trials`` draws
    shows no ill-conditioned sub-frame. Ranking is by (mean, max, index);
    if nothing is valid the least-often-singular candidate is returned with
    ``valid=False``.
    """
    _check_family(plan.family, n, m)
    tp = plan.trial_plan
    if tp.k > n or tp.k < m:
        raise InvalidParameters(f"need m <= k <= n, got m={m}, k={tp.k}, n={n}")
    rng = trial_rng(tp.seed, 0, STREAM_CANDIDATES)
    specs = []
    for i in range(plan.candidates):
        if i < len(plan.injected):
            spec = plan.injected[i]
            if spec.n != n or spec.m != m:
                raise InvalidParameters(f"injected spec {i} has shape ({spec.m}, {spec.n}), expected ({m}, {n})")
            specs.append((spec, _describe(spec)))
        else:
            specs.append(_sample_candidate(plan, n, m, rng))

    records = []
    screen = TrialPlan(plan.prescreen_trials, tp.seed, tp.k) if plan.prescreen_trials > 0 else None
    for i, (spec, label) in enumerate(specs):
        frame = build_frame(spec)
        valid = True
        if screen is not None:
            pre = estimate_noise_amp(frame, screen, threads, _stream=STREAM_PRESCREEN)
            valid = pre.fraction_ill_conditioned == 0
        est = estimate_noise_amp(frame, tp, threads)
        records.append(CandidateRecord(i, spec, est, valid, label))

    pool = [r for r in records if r.valid]
    if pool:
        best = min(pool, key=lambda r: (r.estimate.mean, r.estimate.max, r.index))
    else:
        log.warning("no valid %s candidate for n=%d m=%d k=%d; returning the least singular one",
                    plan.family.value, n, m, tp.k)
        best = min(records, key=lambda r: (r.estimate.fraction_ill_conditioned, r.estimate.mean,
                                           r.estimate.max, r.index))
    return SearchResult(build_frame(best.spec), best.estimate.mean, records, valid=bool(pool))


# --------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRow:
    gamma_inv: float
    n: int
    k: int
    family: str
    mean_amp: float
    max_amp: float
    fraction_ill: float
    mp_benchmark: float
    manova_benchmark: float
    valid: bool
    flag: str = ""


def gamma_sweep(m: int, inverse_gammas: Sequence[float], k_over_n: float, plan: SearchPlan,
                families: Sequence[FrameKind] = (FrameKind.NCP, FrameKind.NUSPC),
                threads: Optional[int] = None) -> List[SweepRow]:
    """Search each family at ``n = round(m / gamma)``, ``k = round(k_over_n * n)``
    and report it next to the USPC baseline and the MP and MANOVA benchmarks.

    Points with ``k < m`` or an unsatisfiable family are kept as flagged rows.
    """
    if not 0 < k_over_n <= 1:
        raise InvalidParameters(f"k_over_n must lie in (0, 1], got {k_over_n}")
    if m < 1:
        raise InvalidParameters(f"m must be positive, got {m}")
    rows: List[SweepRow] = []
    nan = float("nan")
    for g_inv in inverse_gammas:
        if g_inv < 1:
            raise InvalidParameters(f"inverse gamma must be >= 1, got {g_inv}")
        n = int(round(m * g_inv))
        k = int(round(k_over_n * n))
        if k < m:
            for fam in (FrameKind.USPC, *families):
                rows.append(SweepRow(g_inv, n, k, fam.value, nan, nan, nan, nan, nan, False, f"k={k} < m={m}"))
            continue
        params = DensityParams.from_counts(m, n, k)
        mp = theoretical_noise_amp(DensityKind.MP, params)
        manova = theoretical_noise_amp(DensityKind.MANOVA, params)
        tp = replace(plan.trial_plan, k=k)

        base = estimate_noise_amp(build_frame(uspc_spec(n, m)), tp, threads)
        base_row = SweepRow(g_inv, n, k, FrameKind.USPC.value, base.mean, base.max,
                            base.fraction_ill_conditioned, mp, manova, base.fraction_ill_conditioned == 0)
        rows.append(base_row)
        for fam in families:
            fam = FrameKind(fam)
            if fam is FrameKind.NCP and n == m:
                # the only power set is all of 0..n-1: the unitary DFT
                rows.append(replace(base_row, family=fam.value, flag="n == m: unitary DFT"))
                continue
            try:
                res = code_search(replace(plan, family=fam, trial_plan=tp), n, m, threads)
            except InvalidParameters as exc:
                rows.append(SweepRow(g_inv, n, k, fam.value, nan, nan, nan, mp, manova, False, str(exc)))
                continue
            est = res.best.estimate
            rows.append(SweepRow(g_inv, n, k, fam.value, est.mean, est.max, est.fraction_ill_conditioned,
                                 mp, manova, res.valid, "" if res.valid else "no valid candidate"))
    return rows
