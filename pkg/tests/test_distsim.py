import numpy as np
import pytest

from framecode.distsim import (
    DataSet,
    NoiseModel,
    StragglerModel,
    decode_ls,
    encode_blocks,
    export_frame,
    import_frame,
    load_csv_matrix,
    partition_data,
    round_to_bits,
    run_simulation,
    worker_compute,
)
from framecode.errors import FormatError, IllConditioned, InvalidParameters, Underdetermined
from framecode.frames import Frame, FrameKind, build_frame, harmonic_frame, ncp_spec, uspc_spec
from framecode.parallel import trial_rng
from framecode.spectra import RetainedSet, analyze_subframe, subframe

ONES = Frame(np.ones((1, 2)), FrameKind.IMPORTED)


def test_partition_examples():
    A = np.arange(8.0).reshape(4, 2)
    blocks = partition_data(A, 2)
    assert [b.shape for b in blocks] == [(2, 2), (2, 2)]
    A5 = np.arange(10.0).reshape(5, 2) + 1
    b5 = partition_data(A5, 2)
    assert [b.shape for b in b5] == [(3, 2), (3, 2)]
    assert np.all(b5[1][-1] == 0)
    np.testing.assert_array_equal(np.concatenate(b5)[:5], A5)
    b3 = partition_data(np.ones((3, 4)), 5)
    assert len(b3) == 5 and all(b.shape == (1, 4) for b in b3)
    assert np.all(b3[3] == 0) and np.all(b3[4] == 0)
    with pytest.raises(InvalidParameters):
        partition_data(A, 0)


def test_encode_examples():
    b = np.array([[1.0, 2.0]])
    enc = encode_blocks([b], ONES)
    assert len(enc) == 2 and np.array_equal(enc[0], b) and np.array_equal(enc[1], b)
    b1, b2 = np.array([[1.0, 0.5]]), np.array([[-2.0, 3.0]])
    enc = encode_blocks([b1, b2], build_frame(uspc_spec(4, 2)))
    for i in range(4):
        np.testing.assert_allclose(enc[i], (b1 + 1j ** i * b2) / np.sqrt(2), atol=1e-15)
    with pytest.raises(InvalidParameters):
        encode_blocks([b1], build_frame(uspc_spec(4, 2)))


def test_unitary_round_trip():
    f = harmonic_frame(5, range(5))
    blocks = partition_data(np.random.default_rng(0).standard_normal((10, 3)), 5)
    x = np.array([1.0, -2.0, 0.5])
    resp = [worker_compute(e, x, NoiseModel.none()) for e in encode_blocks(blocks, f)]
    dec = decode_ls(resp, RetainedSet(5, range(5)), f)
    np.testing.assert_allclose(dec.products, np.stack([b @ x for b in blocks]), atol=1e-13)


def test_worker_compute_models():
    rng = np.random.default_rng(0)
    block = rng.standard_normal((100_000, 4))
    x = rng.standard_normal(4)
    exact = worker_compute(block, x, NoiseModel.none())
    assert np.array_equal(exact, block @ x)
    assert np.array_equal(worker_compute(block[:50], x, NoiseModel.round_to_bits(52)), block[:50] @ x)
    noisy = worker_compute(block, x, NoiseModel.gaussian(1e-3), trial_rng(0, 0))
    err = noisy - exact
    assert np.var(err.real) == pytest.approx(1e-6, rel=0.05)
    assert np.var(err.imag) == pytest.approx(1e-6, rel=0.05)
    with pytest.raises(InvalidParameters):
        worker_compute(block, x, NoiseModel.gaussian(1.0))


def test_round_to_bits():
    assert round_to_bits(1.0 + 2.0 ** -20, 10) == 1.0
    assert round_to_bits(1.0 + 2.0 ** -10, 10) == 1.0 + 2.0 ** -10
    v = np.random.default_rng(1).standard_normal(1000)
    assert np.array_equal(round_to_bits(v, 52), v)
    assert np.max(np.abs(round_to_bits(v, 12) - v) / np.abs(v)) <= 2.0 ** -12
    rng = np.random.default_rng(2)
    block, x = rng.standard_normal((30, 16)), rng.standard_normal(16)
    err = np.abs(worker_compute(block, x, NoiseModel.round_to_bits(10)) - block @ x)
    assert 0 < err.max() < 1e-1
    with pytest.raises(InvalidParameters):
        NoiseModel.round_to_bits(1)


def test_decode_examples():
    dec = decode_ls([np.array([3.0]), np.array([5.0])], RetainedSet(2, (0, 1)), ONES)
    np.testing.assert_allclose(dec.products, [[4.0]])
    f = harmonic_frame(4, [0, 2])
    with pytest.raises(IllConditioned) as info:
        decode_ls([np.ones(1), np.ones(1)], RetainedSet(4, (0, 2)), f)
    assert info.value.kappa > 1e6
    with pytest.raises(Underdetermined):
        decode_ls([np.ones(1)], RetainedSet(4, (0,)), f)


@pytest.mark.parametrize("seed", range(5))
def test_zero_noise_exact_uspc(seed):
    f = build_frame(uspc_spec(8, 4))
    data = DataSet.random(13, 5, seed)
    blocks = partition_data(data.A, 4)
    rng = trial_rng(seed, 0)
    ret = RetainedSet(8, np.sort(rng.choice(8, 5, replace=False)))
    enc = encode_blocks(blocks, f)
    dec = decode_ls([worker_compute(enc[i], data.x, NoiseModel.none()) for i in ret.indices], ret, f)
    est = dec.products.reshape(-1)[:13]
    assert np.linalg.norm(est - data.truth) / np.linalg.norm(data.truth) <= 1e-10
    assert dec.imag_residue < 1e-8


def test_noiseless_full_participation():
    f = build_frame(ncp_spec(31, 15, [1, 2, 4, 5, 7, 8, 9, 10, 14, 16, 18, 19, 20, 25, 28]))
    res = run_simulation(DataSet.random(60, 6, 0), f, NoiseModel.none(), StragglerModel.random_k(31), 5, 0)
    assert res.mse <= 1e-20 and res.rel_frobenius < 1e-12
    assert res.kappa_min <= res.kappa_mean <= res.kappa_max
    assert res.retained_histogram == {31: 5}


def test_mse_matches_noise_amp_fixed_set():
    f = build_frame(ncp_spec(20, 8, [0, 1, 3, 7, 8, 11, 13, 17]))
    erased = [2, 5, 6, 11, 12, 13, 17, 19]
    sigma = 1e-3
    res = run_simulation(DataSet.random(16, 4, 1), f, NoiseModel.gaussian(sigma),
                         StragglerModel.fixed_set(erased), 5000, 3)
    keep = RetainedSet(20, [i for i in range(20) if i not in erased])
    amp = analyze_subframe(subframe(f, keep)).noise_amp
    assert res.mse / sigma ** 2 == pytest.approx(amp, rel=0.05)


def test_mse_linear_in_noise_power():
    f = build_frame(uspc_spec(16, 6))
    data = DataSet.random(24, 3, 0)
    strag = StragglerModel.fixed_set([0, 3, 9])
    a = run_simulation(data, f, NoiseModel.gaussian(1e-3), strag, 3000, 1)
    b = run_simulation(data, f, NoiseModel.gaussian(np.sqrt(2) * 1e-3), strag, 3000, 2)
    se = np.hypot(2 * a.mse_stderr, b.mse_stderr)
    assert abs(b.mse - 2 * a.mse) <= 3 * se


def test_more_nodes_help():
    f = build_frame(ncp_spec(24, 10, [0, 1, 2, 4, 7, 9, 12, 15, 16, 20]))
    data = DataSet.random(20, 3, 0)
    noise = NoiseModel.gaussian(1e-3)
    prev = None
    for k in (13, 14, 18, 24):
        r = run_simulation(data, f, noise, StragglerModel.random_k(k), 2000, 4)
        if prev is not None:
            assert r.mse <= prev.mse + 3 * np.hypot(r.mse_stderr, prev.mse_stderr)
        prev = r


def test_padding_neutrality():
    f = build_frame(ncp_spec(12, 5, [0, 2, 3, 7, 9]))
    rng = np.random.default_rng(3)
    A, x = rng.standard_normal((13, 4)), rng.standard_normal(4)
    Ap = np.vstack([A, np.zeros((2, 4))])  # 15 rows = 5 blocks of 3, as the padded split
    for a, b in zip(partition_data(A, 5), partition_data(Ap, 5)):
        assert np.array_equal(a, b)
    rng_a, rng_b = trial_rng(0, 0), trial_rng(0, 0)
    ret = RetainedSet(12, [0, 1, 3, 4, 6, 8, 10, 11])
    outs = []
    for data, r in ((DataSet(A, x), rng_a), (DataSet(Ap, x), rng_b)):
        enc = encode_blocks(partition_data(data.A, 5), f)
        resp = [worker_compute(enc[i], data.x, NoiseModel.gaussian(1e-3), r) for i in ret.indices]
        outs.append(decode_ls(resp, ret, f))
    assert np.array_equal(outs[0].products.reshape(-1)[:13], outs[1].products.reshape(-1)[:13])
    assert outs[0].kappa == outs[1].kappa
    strag = StragglerModel.random_k(8)
    r1 = run_simulation(DataSet(A, x), f, NoiseModel.gaussian(1e-3), strag, 20, 0)
    r2 = run_simulation(DataSet(Ap, x), f, NoiseModel.gaussian(1e-3), strag, 20, 0)
    assert (r1.kappa_mean, r1.kappa_min, r1.kappa_max) == (r2.kappa_mean, r2.kappa_min, r2.kappa_max)


def test_failed_decodes_are_counted():
    f = build_frame(uspc_spec(10, 6))
    res = run_simulation(DataSet.random(12, 2, 0), f, NoiseModel.gaussian(1e-4),
                         StragglerModel.delay(1.0, 0.7), 300, 0)
    assert 0 < res.failed_decodes < 300
    assert sum(res.retained_histogram.values()) == 300
    assert sum(v for k, v in res.retained_histogram.items() if k < 6) == res.failed_decodes
    with pytest.raises(InvalidParameters):
        run_simulation(DataSet.random(12, 2, 0), f, NoiseModel.none(), StragglerModel.random_k(5), 3, 0)
    with pytest.raises(InvalidParameters):
        StragglerModel.delay(0, 1)


def test_simulation_deterministic_across_threads():
    f = build_frame(ncp_spec(31, 15, [1, 2, 4, 5, 7, 8, 9, 10, 14, 16, 18, 19, 20, 25, 28]))
    data = DataSet.random(30, 4, 0)
    args = (data, f, NoiseModel.gaussian(1e-4), StragglerModel.random_k(20), 600, 5)
    a = run_simulation(*args, threads=1)
    b = run_simulation(*args, threads=4)
    assert a.to_dict() == b.to_dict()


# --- files -----------------------------------------------------------------


@pytest.mark.parametrize("fmt,suffix", [("frame", ".frame"), ("npy", ".npy")])
def test_frame_round_trip(tmp_path, fmt, suffix):
    f = build_frame(uspc_spec(9, 4))
    path = tmp_path / ("f" + suffix)
    export_frame(f, path, fmt)
    g = import_frame(path)
    assert g.kind is FrameKind.IMPORTED
    assert np.max(np.abs(g.matrix - f.matrix)) <= 1e-15


def test_frame_file_layout(tmp_path):
    path = tmp_path / "f.frame"
    export_frame(build_frame(uspc_spec(4, 2)), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "2 4" and len(lines) == 9
    re0, im0 = map(float, lines[1].split())
    re3, im3 = map(float, lines[4].split())  # column 1, row 1 = i/sqrt(2)
    assert (re0, im0) == (float(1 / np.sqrt(2)), 0.0)
    assert re3 == pytest.approx(0, abs=1e-16) and im3 == pytest.approx(1 / np.sqrt(2), abs=1e-16)


def test_frame_file_errors(tmp_path):
    bad = tmp_path / "zero.frame"
    bad.write_text("2 2\n1 0\n0 0\n0 0\n0 0\n")
    with pytest.raises(FormatError):
        import_frame(bad)
    short = tmp_path / "short.frame"
    short.write_text("2 2\n1 0\n0 0\n")
    with pytest.raises(FormatError):
        import_frame(short)
    junk = tmp_path / "junk.frame"
    junk.write_text("two two\n")
    with pytest.raises(FormatError):
        import_frame(junk)


def test_external_generator_side_by_side(tmp_path):
    # a circulant 0/1 generator from outside the package, evaluated under the same decoder
    m, n = 5, 10
    G = np.zeros((m, n))
    for i in range(n):
        G[[i % m, (i + 1) % m, (i + 3) % m], i] = 1.0
    path = tmp_path / "ext.npy"
    np.save(path, G)
    ext = import_frame(path)
    ncp = build_frame(ncp_spec(n, m, [0, 1, 3, 5, 6]))
    data = DataSet.random(10, 3, 0)
    args = (NoiseModel.gaussian(1e-4), StragglerModel.random_k(8), 200, 1)
    for frame in (ext, ncp):
        r = run_simulation(data, frame, *args)
        assert r.trials == 200 and np.isfinite(r.mse) or r.failed_decodes > 0


def test_load_csv(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4\n")
    np.testing.assert_array_equal(load_csv_matrix(p), [[1, 2], [3, 4]])
    p.write_text("1,x\n")
    with pytest.raises(FormatError):
        load_csv_matrix(p)


def test_dataset_validation():
    with pytest.raises(InvalidParameters):
        DataSet(np.ones((2, 3)), np.ones(2))
    with pytest.raises(InvalidParameters):
        DataSet(np.array([[np.nan]]), np.ones(1))
