import math

import numpy as np
import pytest

import smpnn


def path3():
    return smpnn.Graph.from_pairs([(0, 1), (1, 2)], 3)


def test_version():
    assert smpnn.version().startswith("smpnn ")


def test_propagate_matches_dense_normalization():
    g = path3()
    a = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
    d = a.sum(axis=1)
    expected = a / np.sqrt(np.outer(d, d))
    assert g.nnz == 7
    assert np.allclose(g.propagate(np.eye(3)), expected, atol=1e-15)


def test_dirichlet_energy_of_constant_signal_on_degree_scaled_vector():
    g = smpnn.Graph.from_pairs([(0, 1), (1, 2), (2, 0)], 3)
    x = np.sqrt(np.array(g.degrees()))[:, None]
    assert g.dirichlet_energy(x) == pytest.approx(0.0, abs=1e-12)


def test_identity_at_init_for_residual_stack():
    data = smpnn.make_synthetic(kind="cycle", num_nodes=10, feature_dim=4, seed=1)
    model = smpnn.Model(4, 8, 3, depth=3, seed=2)
    states = model.hidden_states(data.graph, data.features)
    assert len(states) == 4
    drift = max(np.abs(s - states[0]).max() for s in states[1:])
    assert drift < 1e-4


def test_model_roundtrip(tmp_path):
    g = path3()
    model = smpnn.Model(2, 4, 2, depth=2, seed=3)
    x = np.arange(6, dtype=float).reshape(3, 2)
    path = tmp_path / "m.ckpt"
    model.save(str(path))
    again = smpnn.Model.load(str(path))
    assert np.array_equal(model.forward(g, x), again.forward(g, x))


def test_train_beats_chance():
    data = smpnn.make_synthetic(num_blocks=2, block_size=40, p_in=0.2, p_out=0.01,
                                feature_dim=4, separation=2.0, seed=0)
    out = smpnn.train(data, depth=2, epochs=30, eval_every=5, seed=0)
    assert out["best_val"] > 0.7
    assert out["history"][0]["epoch"] == 0
    acc = smpnn.evaluate(data, out["model"], split="test")
    assert acc == pytest.approx(out["test_at_best"])


def test_dataset_roundtrip(tmp_path):
    data = smpnn.make_synthetic(kind="path", num_nodes=12, feature_dim=3, seed=4)
    smpnn.save_dataset(data, str(tmp_path))
    again = smpnn.load_dataset(str(tmp_path))
    assert smpnn.load_dataset(str(tmp_path)).fingerprint == again.fingerprint
    assert np.array_equal(again.features, data.features)
    assert again.classes == data.classes
    assert again.graph.nnz == data.graph.nnz
    assert (again.train, again.val, again.test) == (data.train, data.val, data.test)


def test_kernel_witness_residual_is_zero():
    report = smpnn.kernel_witness_sweep(4, 3, trials=20, seed=1)
    assert report.scalars["max_residual"] < 1e-12


def test_gordon_bound_respected():
    report = smpnn.gordon_bound_trial(16, 50, t=4.0, seed=0)
    assert report.scalars["upper_violations"] == 0


def test_injectivity_small():
    report = smpnn.residual_injectivity_trial(3, 4, trials=20, seed=0)
    assert report.scalars["implication_holds"] == 1.0


def test_oversmoothing_energy_decays_without_residual():
    g = smpnn.Graph.from_pairs([(i, (i + 1) % 8) for i in range(8)], 8)
    x0 = np.random.default_rng(0).normal(size=(8, 3))
    trace = smpnn.oversmoothing_trace(g, x0, 40)
    e = trace["normalized"]
    assert len(e) == 41
    assert e[-1] < 1e-6 * e[0]


def test_attention_weights_form_a_distribution():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 3))
    w = [rng.normal(size=(3, 3)) for _ in range(3)]
    weights, out = smpnn.linear_global_attention(x, *w)
    assert weights.shape == (1, 5)
    assert math.isclose(weights.sum(), 1.0, abs_tol=1e-12)
    assert out.shape == (5, 3)


def test_errors_carry_codes():
    with pytest.raises(smpnn.SmpnnError) as info:
        smpnn.Model(2, 2, 2, variant="nope")
    assert info.value.code == "invalid_argument"
    with pytest.raises(smpnn.SmpnnError) as info:
        smpnn.load_dataset("/nonexistent/dir")
    assert info.value.code == "io_error"
