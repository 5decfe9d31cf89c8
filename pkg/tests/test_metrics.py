import numpy as np
import pytest

from foagen.dataset import SynthClassSpec, build_dataset, default_classes, synth_mono
from foagen.foa import encode_foa
from foagen.geometry import Direction, fibonacci_grid
from foagen.metrics import (ClassifierOracle, EmbeddingStats, LogMelEmbedder,
                            NoSignalError, class_accuracy, doa_error,
                            estimate_doa, eval_report, frechet_distance,
                            kl_divergence, sqrtm_product)


# ---------------------------------------------------------------- DoA


def test_doa_error_identities():
    a = Direction(0.3, 0.2)
    assert doa_error(a, a) < 1e-6
    north = Direction(0.0, np.pi / 2)
    south = Direction(1.0, -np.pi / 2)  # azimuth irrelevant at the poles
    assert doa_error(north, south) == pytest.approx(180.0)
    b = Direction(-1.0, -0.4)
    assert doa_error(a, b) == pytest.approx(doa_error(b, a))


def test_estimate_doa_recovers_grid_points():
    grid = fibonacci_grid(900)
    mono = synth_mono(default_classes(1)[0], 7)
    for idx in range(0, 900, 120):
        d = grid.points[idx]
        est = estimate_doa(encode_foa(mono, d, 16000), grid)
        # rank-one encode: steered power is monotone in cos(gamma), so the
        # argmax is exactly the encoded grid point (up to arccos roundoff)
        assert doa_error(est.direction, d) < 1e-4
        assert not est.ambiguous


def test_estimate_doa_scale_invariant_argmax():
    mono = synth_mono(default_classes(1)[0], 3)
    a = encode_foa(mono, Direction(1.1, -0.3), 16000).channels
    e1 = estimate_doa(a)
    e2 = estimate_doa(1000.0 * a)
    assert doa_error(e1.direction, e2.direction) < 1e-9
    np.testing.assert_allclose(e2.power_map, 1e6 * e1.power_map, rtol=1e-9)


def test_estimate_doa_w_only_is_ambiguous():
    a = np.zeros((4, 256))
    a[0] = np.sin(np.linspace(0, 20, 256))
    est = estimate_doa(a)
    assert est.ambiguous
    assert est.power_map.std() < 1e-9 * est.power_map.mean()


def test_estimate_doa_errors():
    with pytest.raises(NoSignalError):
        estimate_doa(np.zeros((4, 100)))
    with pytest.raises(NoSignalError):
        estimate_doa(np.zeros((4, 0)))
    with pytest.raises(ValueError):
        estimate_doa(np.zeros((3, 100)))
    with pytest.raises(ValueError):
        estimate_doa(np.ones((4, 10)), weighting="cardioid")


def test_estimate_doa_max_re_weighting():
    mono = synth_mono(default_classes(1)[0], 11)
    d = Direction(-2.2, 0.7)
    est = estimate_doa(encode_foa(mono, d, 16000), weighting="max-re")
    assert doa_error(est.direction, d) < 4.5  # still within one grid cell


# ---------------------------------------------------------------- embeddings


def test_embedding_stats_validation():
    with pytest.raises(ValueError):
        EmbeddingStats.from_samples(np.zeros(5))
    with pytest.raises(ValueError):
        EmbeddingStats.from_samples(np.zeros((3, 3)))  # need dim+1 samples
    with pytest.raises(ValueError):
        EmbeddingStats(np.zeros(2), np.zeros((3, 3)), 4)
    with pytest.raises(ValueError):
        EmbeddingStats(np.zeros(2), np.array([[1.0, 0.5], [0.2, 1.0]]), 4)
    rng = np.random.default_rng(0)
    s = EmbeddingStats.from_samples(rng.standard_normal((10, 3)))
    assert s.count == 10
    np.testing.assert_allclose(s.cov, s.cov.T)


def test_sqrtm_product_squares_back():
    rng = np.random.default_rng(1)
    for _ in range(5):
        m = rng.standard_normal((6, 6))
        a = m @ m.T + 0.1 * np.eye(6)
        m = rng.standard_normal((6, 6))
        b = m @ m.T + 0.1 * np.eye(6)
        s = sqrtm_product(a, b)
        np.testing.assert_allclose(s @ s, a @ b, atol=1e-8)


def test_frechet_identity_zero():
    rng = np.random.default_rng(2)
    s = EmbeddingStats.from_samples(rng.standard_normal((40, 8)))
    assert frechet_distance(s, s) < 1e-9


def test_frechet_identity_zero_ill_conditioned():
    # variance spread over ten orders must not lift the self-distance
    rng = np.random.default_rng(21)
    x = rng.standard_normal((70, 64)) * np.logspace(-4.5, 1, 64)
    s = EmbeddingStats.from_samples(x)
    assert frechet_distance(s, s) < 1e-9


def test_frechet_trace_term_matches_sqrtm_oracle():
    # independent route: Tr((S_p S_q)^{1/2}) through the exposed matrix root
    rng = np.random.default_rng(22)
    m = rng.standard_normal((5, 5))
    a = m @ m.T + 0.2 * np.eye(5)
    m = rng.standard_normal((5, 5))
    b = m @ m.T + 0.2 * np.eye(5)
    p = EmbeddingStats(np.zeros(5), a, 9)
    q = EmbeddingStats(np.zeros(5), b, 9)
    via_sqrtm = float(np.trace(sqrtm_product(a + 1e-6 * np.eye(5),
                                             b + 1e-6 * np.eye(5))))
    expect = np.trace(a) + np.trace(b) + 2e-6 * 5 - 2.0 * via_sqrtm
    assert frechet_distance(p, q) == pytest.approx(max(expect, 0.0), abs=1e-8)


def test_frechet_one_dimensional_closed_form():
    p = EmbeddingStats(np.array([1.0]), np.array([[4.0]]), 10)
    q = EmbeddingStats(np.array([-2.0]), np.array([[9.0]]), 10)
    v1, v2 = 4.0 + 1e-6, 9.0 + 1e-6
    expect = 9.0 + v1 + v2 - 2.0 * np.sqrt(v1 * v2)
    assert frechet_distance(p, q) == pytest.approx(expect, rel=1e-9)


def test_frechet_mean_shift_only():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 4))
    mu = np.array([2.0, 0.0, -1.0, 0.5])
    p = EmbeddingStats.from_samples(x)
    q = EmbeddingStats.from_samples(x + mu)
    assert frechet_distance(p, q) == pytest.approx(float(mu @ mu), abs=1e-9)


def test_frechet_dimension_mismatch():
    p = EmbeddingStats(np.zeros(2), np.eye(2), 5)
    q = EmbeddingStats(np.zeros(3), np.eye(3), 5)
    with pytest.raises(ValueError):
        frechet_distance(p, q)


def test_frechet_commutative_on_gaussians():
    rng = np.random.default_rng(4)
    p = EmbeddingStats.from_samples(rng.standard_normal((30, 5)) * 2.0 + 1.0)
    q = EmbeddingStats.from_samples(rng.standard_normal((30, 5)))
    assert frechet_distance(p, q) == pytest.approx(frechet_distance(q, p), rel=1e-6)


# ---------------------------------------------------------------- KL


def test_kl_identical_is_zero():
    rng = np.random.default_rng(5)
    p = rng.dirichlet(np.ones(4), size=10)
    assert kl_divergence(p, p) == 0.0


def test_kl_matches_brute_force():
    rng = np.random.default_rng(6)
    gen = rng.dirichlet(np.ones(3), size=8)
    ref = rng.dirichlet(np.ones(3), size=8)
    total = 0.0
    for i in range(8):
        for c in range(3):
            if ref[i, c] > 0:
                total += ref[i, c] * np.log(ref[i, c] / max(gen[i, c], 1e-10))
    assert kl_divergence(gen, ref) == pytest.approx(total / 8, rel=1e-9)


def test_kl_unpaired_shapes():
    with pytest.raises(ValueError, match="unpaired"):
        kl_divergence(np.ones((3, 2)) / 2, np.ones((4, 2)) / 2)
    with pytest.raises(ValueError, match="unpaired"):
        kl_divergence(np.ones((0, 2)), np.ones((0, 2)))


def test_kl_ignores_zero_reference_bins():
    gen = np.array([[0.5, 0.5, 0.0]])
    ref = np.array([[1.0, 0.0, 0.0]])
    assert kl_divergence(gen, ref) == pytest.approx(np.log(2.0))


def test_kl_floors_generated_probabilities():
    gen = np.array([[0.0, 1.0]])
    ref = np.array([[1.0, 0.0]])
    assert kl_divergence(gen, ref) == pytest.approx(np.log(1e10))


# ---------------------------------------------------------------- oracle


def test_log_mel_embedder_shapes_and_determinism():
    emb = LogMelEmbedder(n_mels=16)
    assert emb.dim == 32
    x = synth_mono(default_classes(1)[0], 0)
    e1 = emb.embed(x, 16000)
    e2 = emb.embed(x, 16000)
    assert e1.shape == (32,)
    np.testing.assert_array_equal(e1, e2)
    batch = emb.embed_batch([x, x], 16000)
    assert batch.shape == (2, 32)
    np.testing.assert_array_equal(batch[0], batch[1])


def test_log_mel_embedder_silence_finite():
    e = LogMelEmbedder(n_mels=8).embed(np.zeros(16000), 16000)
    assert np.all(np.isfinite(e))


def test_oracle_unfitted_raises():
    with pytest.raises(RuntimeError, match="not fitted"):
        ClassifierOracle().posterior(np.zeros(100), 16000)


def test_oracle_fit_validation():
    with pytest.raises(ValueError):
        ClassifierOracle().fit([], [], 16000)
    with pytest.raises(ValueError):
        ClassifierOracle().fit([np.zeros(10)], [0, 1], 16000)


def test_oracle_separates_synthetic_classes():
    specs = default_classes(3)
    clips, labels = [], []
    for cid, s in enumerate(specs):
        for seed in range(8):
            clips.append(synth_mono(s, seed))
            labels.append(cid)
    oracle = ClassifierOracle().fit(clips, labels, 16000)
    fresh, fresh_labels = [], []
    for cid, s in enumerate(specs):
        for seed in range(100, 106):
            fresh.append(synth_mono(s, seed))
            fresh_labels.append(cid)
    assert class_accuracy(fresh, fresh_labels, oracle, 16000) == 100.0
    post = oracle.posterior(fresh[0], 16000)
    assert post.shape == (3,)
    assert post.sum() == pytest.approx(1.0)
    assert np.all(post >= 0)


def test_class_accuracy_errors():
    oracle = ClassifierOracle()
    with pytest.raises(RuntimeError):
        class_accuracy([np.zeros(10)], [0], oracle, 16000)
    clips = [synth_mono(default_classes(1)[0], s) for s in range(3)]
    oracle.fit(clips, [0, 0, 0], 16000)
    with pytest.raises(ValueError):
        class_accuracy([], [], oracle, 16000)


# ---------------------------------------------------------------- report


@pytest.fixture(scope="module")
def eval_dataset(tmp_path_factory):
    # 66 clips: enough samples for the 64-dim embedding covariance (n >= d+1)
    root = tmp_path_factory.mktemp("evalset")
    build_dataset(default_classes(3), 22, root, seed=4)
    return root


def test_eval_report_self_comparison(eval_dataset):
    rep = eval_report(eval_dataset, eval_dataset)
    vals = {r.metric: r.value for r in rep.rows}
    assert vals["acc_percent"] == 100.0
    assert vals["doa_error_mean_deg"] < 4.5
    assert vals["doa_error_median_deg"] <= vals["doa_error_mean_deg"] * 2
    assert vals["fd"] < 1e-6
    assert vals["fad"] < 1e-6
    assert vals["kl"] < 1e-9
    assert rep.doa_errors.shape == (66,)
    assert rep.gen_embed.shape == (66, 64)


def test_eval_report_csv_schema(eval_dataset, tmp_path):
    rep = eval_report(eval_dataset, eval_dataset)
    out = tmp_path / "report.csv"
    rep.write_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "metric,value,count"
    assert len(lines) == 7
    names = [l.split(",")[0] for l in lines[1:]]
    assert names == ["acc_percent", "doa_error_mean_deg", "doa_error_median_deg",
                     "fd", "fad", "kl"]
    table = rep.as_table()
    assert "acc_percent" in table and "value" in table


def test_eval_report_missing_sidecar(tmp_path):
    (tmp_path / "gen").mkdir()
    (tmp_path / "ref").mkdir()
    with pytest.raises(FileNotFoundError, match="condition sidecar"):
        eval_report(tmp_path / "gen", tmp_path / "ref")


def test_eval_report_unpaired_class(eval_dataset):
    # add one generated clip labeled with a class absent from the reference
    manifest = (eval_dataset / "manifest.txt").read_text()
    first_wav = manifest.splitlines()[5].split()[0]
    bad = manifest + f"{first_wav} 7 0.0 0.0\n"
    (eval_dataset / "manifest_bad.txt").write_text(bad)
    with pytest.raises(ValueError, match="unpaired"):
        eval_report(eval_dataset, eval_dataset, gen_manifest="manifest_bad.txt")


def test_eval_report_rejects_non_foa(tmp_path):
    from foagen.wavio import write_wav

    write_wav(tmp_path / "m.wav", np.zeros((2, 100)), 16000)
    (tmp_path / "manifest.txt").write_text("m.wav 0 0.0 0.0\n")
    with pytest.raises(ValueError, match="4 channels"):
        eval_report(tmp_path, tmp_path)
