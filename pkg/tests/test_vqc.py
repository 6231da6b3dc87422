import numpy as np
import pytest

from qflsim import qsim, vqc

CFG4 = vqc.VqcConfig(feature_count=4, class_count=3)


def test_parameter_count():
    assert CFG4.parameter_count == 16
    assert vqc.VqcConfig(1, 2, ansatz_reps=0).parameter_count == 1


def test_feature_map_zero_input_is_hadamards():
    circuit = vqc.build_feature_map(np.zeros(4), 4, reps=1)
    state = qsim.apply_circuit(qsim.zero_state(4), circuit)
    np.testing.assert_allclose(state.amplitudes, np.full(16, 0.25), atol=1e-12)


def test_feature_map_gate_count():
    circuit = vqc.build_feature_map(np.array([0.3, 1.1, 2.0, 0.7]), 4, reps=1)
    assert len(circuit.gates) == 8
    assert sum(g.kind == "H" for g in circuit.gates) == 4
    assert sum(g.kind == "P" for g in circuit.gates) == 4


def test_feature_map_phase_flip_at_pi_over_two():
    # P(2 * pi/2) = P(pi) = Z on qubit 0: sign flips where qubit-0 bit is 1
    circuit = vqc.build_feature_map(np.array([np.pi / 2, 0.0]), 2, reps=1)
    state = qsim.apply_circuit(qsim.zero_state(2), circuit)
    signs = np.sign(np.real(state.amplitudes * 2))
    np.testing.assert_allclose(signs, [1, -1, 1, -1])


def test_ansatz_single_qubit_no_reps():
    circuit = vqc.build_ansatz(np.array([0.4]), 1, reps=0)
    assert len(circuit.gates) == 1
    assert circuit.gates[0].kind == "RY"


def test_ansatz_consumes_sixteen_parameters():
    theta = np.arange(16, dtype=float)
    circuit = vqc.build_ansatz(theta, 4, reps=3)
    assert sum(g.kind == "RY" for g in circuit.gates) == 16
    with pytest.raises(ValueError):
        vqc.build_ansatz(theta[:-1], 4, reps=3)


def test_zero_ansatz_on_uniform_state_is_identity():
    # RY(0) = I and CX permutes the uniform superposition onto itself
    x = np.zeros(4)
    fm_state = qsim.apply_circuit(qsim.zero_state(4), vqc.build_feature_map(x, 4))
    full = vqc.run_circuit(x, np.zeros(16), CFG4)
    np.testing.assert_allclose(full.amplitudes, fm_state.amplitudes, atol=1e-12)


def test_class_probabilities_uniform_binary():
    cfg = vqc.VqcConfig(2, 2, ansatz_reps=0)
    probs = vqc.class_probabilities(np.zeros(2), np.zeros(2), cfg)
    np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-12)


def test_class_probabilities_one_hot_basis_state():
    # |01> is basis index 1 -> class 1 mod 4
    state_probs = np.zeros(4)
    state_probs[1] = 1.0
    agg = vqc._aggregate_mod_classes(state_probs, 4)
    np.testing.assert_array_equal(agg, [0, 1, 0, 0])


def test_class_probabilities_three_classes_uniform():
    # indices 0..3 uniformly: class 0 gets {0, 3}, classes 1, 2 one index each
    agg = vqc._aggregate_mod_classes(np.full(4, 0.25), 3)
    np.testing.assert_allclose(agg, [0.5, 0.25, 0.25])


def test_class_probabilities_sum_to_one(rng):
    for _ in range(200):
        x = rng.uniform(0, 2 * np.pi, 4)
        theta = rng.uniform(-np.pi, np.pi, 16)
        assert abs(vqc.class_probabilities(x, theta, CFG4).sum() - 1.0) < 1e-10


def test_batch_path_matches_circuit_path(rng):
    X = rng.uniform(0, 2 * np.pi, (8, 4))
    theta = rng.uniform(-np.pi, np.pi, 16)
    per_sample = np.array([vqc.class_probabilities(x, theta, CFG4) for x in X])
    batched = vqc.class_probabilities_batch(vqc.encode_features(X, CFG4), theta, CFG4)
    np.testing.assert_allclose(batched, per_sample, atol=1e-12)


def test_cross_entropy_examples(rng):
    # clamp: single sample with p_y = 0 -> -log(1e-12)
    cfg = vqc.VqcConfig(1, 2, ansatz_reps=0)
    # RY(-pi/2) rotates H|0> back to |0>: class 0 prob 1 -> loss 0
    theta = np.array([-np.pi / 2])
    assert vqc.cross_entropy_loss([[0.0]], [0], theta, cfg) == pytest.approx(0.0, abs=1e-12)
    # label 1 has probability ~0 -> clamp active
    loss = vqc.cross_entropy_loss([[0.0]], [1], theta, cfg)
    assert loss == pytest.approx(-np.log(1e-12))
    # p_y = 0.5 for all samples -> ln 2
    cfg2 = vqc.VqcConfig(2, 2, ansatz_reps=0)
    loss = vqc.cross_entropy_loss(np.zeros((4, 2)), [0, 1, 0, 1], np.zeros(2), cfg2)
    assert loss == pytest.approx(np.log(2.0), abs=1e-12)


def test_loss_invariant_under_sample_order(rng):
    X = rng.uniform(0, 2 * np.pi, (12, 4))
    y = rng.integers(0, 3, 12)
    theta = rng.uniform(-np.pi, np.pi, 16)
    base = vqc.cross_entropy_loss(X, y, theta, CFG4)
    perm = rng.permutation(12)
    assert vqc.cross_entropy_loss(X[perm], y[perm], theta, CFG4) == pytest.approx(base, abs=1e-12)


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        vqc.DatasetObjective(np.zeros((0, 4)), np.zeros(0, dtype=int), CFG4)


def test_predict_tie_breaks_to_lowest_class():
    cfg = vqc.VqcConfig(2, 2, ansatz_reps=0)
    # uniform state -> exact (0.5, 0.5) tie
    assert vqc.predict(np.zeros(2), np.zeros(2), cfg) == 0


def test_accuracy_fraction(rng):
    X = rng.uniform(0, 2 * np.pi, (4, 4))
    theta = rng.uniform(-np.pi, np.pi, 16)
    preds = vqc.predict_batch(X, theta, CFG4)
    labels = preds.copy()
    labels[0] = (labels[0] + 1) % 3  # force 3 of 4 correct
    assert vqc.accuracy(X, labels, theta, CFG4) == pytest.approx(0.75)


def test_exact_gradient_matches_finite_differences(rng):
    X = rng.uniform(0, 2 * np.pi, (5, 4))
    y = rng.integers(0, 3, 5)
    theta = rng.uniform(-np.pi, np.pi, 16)
    obj = vqc.DatasetObjective(X, y, CFG4)
    _, grad = obj.gradient(theta)
    h = 1e-5
    fd = np.array([(obj(theta + h * e) - obj(theta - h * e)) / (2 * h) for e in np.eye(16)])
    assert np.max(np.abs(grad - fd)) < 1e-4
