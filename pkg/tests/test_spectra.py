import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.stats import unitary_group

from framecode.errors import IllConditioned, InvalidParameters, Underdetermined
from framecode.frames import build_frame, harmonic_frame, random_gaussian_frame, uspc_spec
from framecode.spectra import (
    DensityKind,
    DensityParams,
    RetainedSet,
    analyze_subframe,
    ks_distance_to_density,
    manova_density,
    manova_edges,
    mp_density,
    mp_edges,
    require_well_conditioned,
    spectral_law,
    subframe,
    theoretical_noise_amp,
)

MP, MANOVA = DensityKind.MP, DensityKind.MANOVA


# --- sub-frames --------------------------------------------------------------


def test_subframe_examples():
    f = build_frame(uspc_spec(4, 2))
    assert np.array_equal(subframe(f, RetainedSet(4, range(4))), f.matrix)
    np.testing.assert_array_equal(subframe(f, RetainedSet(4, (0, 2))), f.matrix[:, [0, 2]])
    with pytest.raises(InvalidParameters):
        RetainedSet(4, (0, 5))
    with pytest.raises(InvalidParameters):
        RetainedSet(4, (2, 1))
    with pytest.raises(InvalidParameters):
        subframe(f, RetainedSet(5, (0, 1)))


def test_analyze_identity():
    r = analyze_subframe(np.eye(3))
    np.testing.assert_allclose(r.eigenvalues, 1)
    assert r.noise_amp == pytest.approx(1) and r.kappa_matrix == pytest.approx(1)
    assert not r.ill_conditioned


@pytest.mark.parametrize("n,m", [(4, 2), (10, 3), (31, 15), (64, 64)])
def test_full_tight_frame_amp_is_gamma(n, m):
    r = analyze_subframe(build_frame(uspc_spec(n, m)).matrix)
    np.testing.assert_allclose(r.eigenvalues, n / m, rtol=1e-12)
    assert abs(r.noise_amp - m / n) <= 1e-10


def test_singular_subframe():
    f = harmonic_frame(4, [0, 2])
    r = analyze_subframe(subframe(f, RetainedSet(4, (0, 2))))
    assert r.ill_conditioned and r.noise_amp == float("inf")
    with pytest.raises(IllConditioned) as info:
        require_well_conditioned(r)
    assert info.value.kappa > 1e6


def test_underdetermined():
    with pytest.raises(Underdetermined):
        analyze_subframe(np.ones((3, 2)) / np.sqrt(3))


@given(st.integers(2, 30).flatmap(lambda m: st.tuples(st.just(m), st.integers(m, 3 * m), st.integers(0, 2**32))))
def test_subframe_report_invariants(args):
    m, k, seed = args
    f = random_gaussian_frame(m, k, seed)
    r = analyze_subframe(f.matrix)
    assert abs(r.eigenvalues.sum() - k) <= 1e-8
    assert np.all(np.diff(r.eigenvalues) >= 0)
    assert r.noise_amp >= m / k * (1 - 1e-12)  # Jensen
    assert r.kappa_gram == pytest.approx(r.kappa_matrix ** 2, rel=1e-6)
    phases = np.exp(2j * np.pi * np.random.default_rng(seed).random(k))
    r2 = analyze_subframe(f.matrix * phases[None, :])
    assert r2.kappa_matrix == pytest.approx(r.kappa_matrix, rel=1e-8)


@pytest.mark.parametrize("m", [4, 64, 256])
def test_eigenvalues_reconstruct_operator(m):
    rng = np.random.default_rng(m)
    sub = rng.standard_normal((m, 2 * m)) + 1j * rng.standard_normal((m, 2 * m))
    sub /= np.linalg.norm(sub, axis=0)
    op = sub @ sub.conj().T
    w, v = np.linalg.eigh(op)
    r = analyze_subframe(sub)
    np.testing.assert_allclose(r.eigenvalues, w, atol=1e-12 * np.abs(w).max())
    rec = (v * r.eigenvalues) @ v.conj().T
    assert np.abs(rec - op).max() <= 1e-9 * np.linalg.norm(op, 2)


def test_noise_amp_equality_only_when_flat():
    r = analyze_subframe(build_frame(uspc_spec(12, 4)).matrix)
    assert r.noise_amp == pytest.approx(4 / 12, abs=1e-14)


# --- densities ---------------------------------------------------------------


def test_mp_examples():
    assert mp_edges(0.25) == pytest.approx((0.25, 2.25))
    assert mp_density(3.0, 0.25) == 0
    with pytest.raises(InvalidParameters):
        mp_edges(1.5)
    with pytest.raises(InvalidParameters):
        mp_density(1.0, 0.0)


@pytest.mark.parametrize("beta", [0.05, 0.25, 0.5, 0.9, 1.0])
def test_mp_integrates_to_one(beta):
    lo, hi = mp_edges(beta)
    mass = quad(lambda x: mp_density(x, beta), lo, hi, limit=200)[0]
    assert abs(mass - 1) <= 1e-6


def test_manova_examples():
    lo, hi = manova_edges(0.5, 0.5)
    assert lo == pytest.approx(0.1340, abs=1e-3) and hi == pytest.approx(1.8660, abs=1e-3)
    assert manova_density(5.0, 0.5, 0.5) == 0
    with pytest.raises(InvalidParameters):
        manova_density(1.0, 0.6, 0.5)


def test_manova_small_gamma_matches_mp():
    lo, hi = mp_edges(0.5)
    x = np.linspace(lo, hi, 501)[1:-1]
    assert np.max(np.abs(manova_density(x, 1e-6, 0.5) - mp_density(x, 0.5))) <= 1e-3


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
def test_manova_edges_converge_to_mp(beta):
    mp = np.array(mp_edges(beta))
    for g in (1e-2, 1e-3, 1e-4):
        assert np.max(np.abs(np.array(manova_edges(g, beta)) - mp)) <= 5 * g


@pytest.mark.parametrize("gamma,beta", [(0.05, 0.1), (0.25, 0.5), (0.5, 0.5), (0.4, 1.0), (0.5, 1.0), (0.3, 0.9)])
def test_manova_integrates_to_one(gamma, beta):
    lo, hi = manova_edges(gamma, beta)
    mass = quad(lambda x: manova_density(x, gamma, beta), lo, hi, limit=200)[0]
    assert abs(mass - 1) <= 1e-6


@pytest.mark.parametrize("gamma,beta", [(0.6, 0.8), (0.6, 1.0), (0.8, 0.8), (0.8, 1.0)])
def test_manova_continuous_mass_deficit(gamma, beta):
    # for gamma (1 + beta) > 1 the continuous part loses mass to an atom at 1/gamma
    lo, hi = manova_edges(gamma, beta)
    mass = quad(lambda x: manova_density(x, gamma, beta), lo, hi, limit=200)[0]
    assert mass == pytest.approx((1 - gamma) / (gamma * beta), abs=1e-6)


# --- spectral laws and benchmarks -----------------------------------------


def _wachter(x, a, b):
    lo = (np.sqrt(1 - a * b) - np.sqrt((1 - a) * b)) ** 2
    hi = (np.sqrt(1 - a * b) + np.sqrt((1 - a) * b)) ** 2
    if not lo < x < hi:
        return 0.0
    return np.sqrt((x - lo) * (hi - x)) / (2 * np.pi * b * x * (1 - a * x))


@pytest.mark.parametrize("gamma,beta", [(0.25, 0.5), (0.5, 1.0), (0.1, 0.8), (0.4, 0.5), (0.45, 0.9), (0.3, 0.6)])
def test_law_quadrature_matches_scipy(gamma, beta):
    for kind in (MP, MANOVA):
        law = spectral_law(kind, DensityParams(gamma, beta))
        if kind is MP:
            f = lambda x: mp_density(x, beta)  # noqa: E731
        else:
            f = lambda x: _wachter(x, gamma / beta, beta)  # noqa: E731
        ref_mass = quad(f, law.lo, law.hi, limit=400)[0] + law.atom_mass
        ref_mean = quad(lambda x: x * f(x), law.lo, law.hi, limit=400)[0] + law.atom_mass * law.atom_at
        assert law.mass() == pytest.approx(ref_mass, rel=1e-7)
        assert law.mean() == pytest.approx(ref_mean, rel=1e-7)
        assert law.mass() == pytest.approx(1.0, abs=1e-8)


def test_theoretical_mp_examples():
    assert theoretical_noise_amp(MP, DensityParams(0.25, 0.5)) == pytest.approx(1.0, rel=1e-8)
    assert theoretical_noise_amp(MP, DensityParams(1e-4, 1e-3)) < 2e-3
    assert theoretical_noise_amp(MP, DensityParams(0.5, 1.0)) == float("inf")
    assert theoretical_noise_amp(MANOVA, DensityParams(0.5, 1.0)) == float("inf")


@given(st.floats(0.02, 0.95), st.floats(0.02, 0.98))
def test_theoretical_closed_forms(beta, frac):
    gamma = frac * beta
    p = DensityParams(gamma, beta)
    assert theoretical_noise_amp(MP, p) == pytest.approx(beta / (1 - beta), rel=1e-6)
    assert theoretical_noise_amp(MANOVA, p) == pytest.approx(beta * (1 - gamma) / (1 - beta), rel=1e-6)


def test_manova_beats_mp():
    p = DensityParams(0.25, 0.5)
    assert theoretical_noise_amp(MANOVA, p) < theoretical_noise_amp(MP, p)


def test_manova_benchmark_against_haar_tight_frames():
    # random m rows of a Haar unitary form a tight frame; random subsets follow the MANOVA law
    m, n, k = 100, 400, 200
    rng = np.random.default_rng(5)
    amps = []
    for t in range(20):
        F = unitary_group.rvs(n, random_state=rng)[:m] * np.sqrt(n / m)
        keep = rng.choice(n, k, replace=False)
        amps.append(analyze_subframe(F[:, keep]).noise_amp)
    assert np.mean(amps) == pytest.approx(theoretical_noise_amp(MANOVA, DensityParams.from_counts(m, n, k)), rel=0.03)


def test_density_params_validation():
    with pytest.raises(InvalidParameters):
        DensityParams(0.6, 0.5)
    with pytest.raises(InvalidParameters):
        DensityParams(0.0, 0.5)
    assert DensityParams.from_counts(50, 100, 50).beta == 1.0


# --- goodness of fit -------------------------------------------------------


def _inverse_sample(law, size, rng):
    grid = np.linspace(law.lo, law.hi, 20001)
    cdf = law.cdf(grid)
    u = rng.random(size)
    return np.interp(u, cdf, grid)


@pytest.mark.parametrize("kind,params", [(MP, DensityParams(0.25, 0.5)), (MANOVA, DensityParams(0.25, 0.5)),
                                         (MANOVA, DensityParams(0.3, 0.9))])
def test_ks_self_consistency(kind, params):
    law = spectral_law(kind, params)
    samples = _inverse_sample(law, 100_000, np.random.default_rng(0))
    assert ks_distance_to_density(samples, kind, params) < 0.01


def test_ks_examples():
    p = DensityParams(0.25, 0.5)
    assert ks_distance_to_density(np.ones(1000), MP, p) > 0.3
    d = ks_distance_to_density([spectral_law(MP, p).mean()], MP, p)
    assert 0 <= d <= 1
    with pytest.raises(InvalidParameters):
        ks_distance_to_density([], MP, p)


def test_ks_distinguishes_laws():
    p = DensityParams(0.25, 0.5)
    law = spectral_law(MP, p)
    samples = _inverse_sample(law, 50_000, np.random.default_rng(1))
    assert ks_distance_to_density(samples, MANOVA, p) > 5 * ks_distance_to_density(samples, MP, p)
