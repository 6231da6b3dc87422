"""Variational quantum classifier built on the statevector simulator.

The circuit is the standard Z feature map (H layer then phase rotations
P(2*x_i)) followed by a RealAmplitudes-style ansatz (RY layers interleaved
with CX entanglement blocks). Basis-state index mod class_count maps
measurement outcomes to classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim

LOSS_CLAMP = 1e-12


@dataclass(frozen=True)
class VqcConfig:
    feature_count: int
    class_count: int
    feature_map_reps: int = 1
    ansatz_reps: int = 3
    entanglement: str = "full"

    def __post_init__(self):
        if self.feature_count < 1:
            raise ValueError("feature_count must be >= 1")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if self.entanglement not in ("full", "linear"):
            raise ValueError(f"unknown entanglement {self.entanglement!r}")

    @property
    def qubit_count(self) -> int:
        return self.feature_count

    @property
    def parameter_count(self) -> int:
        return self.qubit_count * (self.ansatz_reps + 1)


def build_feature_map(x: np.ndarray, qubit_count: int, reps: int = 1) -> qsim.Circuit:
    x = np.asarray(x, dtype=float)
    if x.shape != (qubit_count,):
        raise ValueError(f"expected {qubit_count} features, got shape {x.shape}")
    gates = []
    for _ in range(reps):
        gates.extend(qsim.h(q) for q in range(qubit_count))
        gates.extend(qsim.p(2.0 * x[q], q) for q in range(qubit_count))
    return qsim.Circuit(qubit_count, tuple(gates))


def _entangler_pairs(qubit_count: int, entanglement: str) -> list[tuple[int, int]]:
    if entanglement == "linear":
        return [(i, i + 1) for i in range(qubit_count - 1)]
    return [(i, j) for i in range(qubit_count) for j in range(i + 1, qubit_count)]


def build_ansatz(
    theta: np.ndarray, qubit_count: int, reps: int = 3, entanglement: str = "full"
) -> qsim.Circuit:
    theta = np.asarray(theta, dtype=float)
    expected = qubit_count * (reps + 1)
    if theta.shape != (expected,):
        raise ValueError(f"expected {expected} parameters, got shape {theta.shape}")
    gates = [qsim.ry(theta[q], q) for q in range(qubit_count)]
    for r in range(reps):
        gates.extend(qsim.cx(c, t) for c, t in _entangler_pairs(qubit_count, entanglement))
        offset = (r + 1) * qubit_count
        gates.extend(qsim.ry(theta[offset + q], q) for q in range(qubit_count))
    return qsim.Circuit(qubit_count, tuple(gates))


def run_circuit(x: np.ndarray, theta: np.ndarray, config: VqcConfig) -> qsim.StateVector:
    state = qsim.zero_state(config.qubit_count)
    state = qsim.apply_circuit(state, build_feature_map(x, config.qubit_count, config.feature_map_reps))
    state = qsim.apply_circuit(
        state, build_ansatz(theta, config.qubit_count, config.ansatz_reps, config.entanglement)
    )
    return state


def _aggregate_mod_classes(probs: np.ndarray, class_count: int) -> np.ndarray:
    dim = probs.shape[-1]
    out = np.zeros(probs.shape[:-1] + (class_count,))
    for c in range(class_count):
        out[..., c] = probs[..., np.arange(c, dim, class_count)].sum(axis=-1)
    return out


def class_probabilities(x: np.ndarray, theta: np.ndarray, config: VqcConfig) -> np.ndarray:
    probs = qsim.probabilities(run_circuit(x, theta, config))
    return _aggregate_mod_classes(probs, config.class_count)


# Batched evaluation path: the feature-map states for a dataset are
# independent of theta, so they are computed once and the ansatz is applied
# to the whole (n_samples, 2**q) block per objective evaluation. Results
# match the per-sample circuit route exactly (same gate matrices).


def encode_features(X: np.ndarray, config: VqcConfig) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    q = config.qubit_count
    if X.shape[1] != q:
        raise ValueError(f"expected {q} features, got {X.shape[1]}")
    dim = 2**q
    amps = np.zeros((X.shape[0], dim), dtype=complex)
    amps[:, 0] = 1.0
    bits = (np.arange(dim)[None, :] >> np.arange(q)[:, None]) & 1  # (q, dim)
    for _ in range(config.feature_map_reps):
        for qubit in range(q):
            amps = qsim.apply_gate_batch(amps, qsim.h(qubit))
        phase = X @ bits  # (n, dim): sum_i x_i * bit_i(j)
        amps = amps * np.exp(2j * phase)
    return amps


def apply_ansatz_batch(amps: np.ndarray, theta: np.ndarray, config: VqcConfig) -> np.ndarray:
    circuit = build_ansatz(theta, config.qubit_count, config.ansatz_reps, config.entanglement)
    for gate in circuit.gates:
        amps = qsim.apply_gate_batch(amps, gate)
    return amps


def class_probabilities_batch(
    encoded: np.ndarray, theta: np.ndarray, config: VqcConfig
) -> np.ndarray:
    """Class probabilities for pre-encoded feature states, shape (n, C)."""
    amps = apply_ansatz_batch(encoded, theta, config)
    return _aggregate_mod_classes(np.abs(amps) ** 2, config.class_count)


class DatasetObjective:
    """Mean cross-entropy of the VQC on a fixed dataset, as a function of theta.

    Supports `evaluate_many` so optimizers can batch the 2n+1 parameter-shift
    evaluations through the vectorized simulator path.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray, config: VqcConfig):
        features = np.atleast_2d(np.asarray(features, dtype=float))
        labels = np.asarray(labels, dtype=int)
        if features.shape[0] == 0:
            raise ValueError("empty dataset")
        if labels.min() < 0 or labels.max() >= config.class_count:
            raise ValueError("labels out of range")
        self.features = features
        self.labels = labels
        self.config = config
        self._encoded = encode_features(features, config)

    def __call__(self, theta: np.ndarray) -> float:
        probs = class_probabilities_batch(self._encoded, theta, self.config)
        p_y = probs[np.arange(len(self.labels)), self.labels]
        return float(np.mean(-np.log(np.maximum(p_y, LOSS_CLAMP))))

    def evaluate_many(self, thetas: np.ndarray) -> np.ndarray:
        return np.array([self(t) for t in thetas])

    def _p_correct(self, theta: np.ndarray) -> np.ndarray:
        probs = class_probabilities_batch(self._encoded, theta, self.config)
        return probs[np.arange(len(self.labels)), self.labels]

    def gradient(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """Exact analytic loss gradient.

        The pi/2 shift rule is exact for the class probabilities (expectations
        of projectors under single Pauli rotations); the chain rule through
        -log then gives the exact cross-entropy gradient.
        """
        theta = np.asarray(theta, dtype=float)
        n = theta.size
        shifts = (np.pi / 2.0) * np.eye(n)
        p0 = np.maximum(self._p_correct(theta), LOSS_CLAMP)
        value = float(np.mean(-np.log(p0)))
        grad = np.empty(n)
        for i in range(n):
            dp = (self._p_correct(theta + shifts[i]) - self._p_correct(theta - shifts[i])) / 2.0
            grad[i] = float(np.mean(-dp / p0))
        return value, grad


def cross_entropy_loss(
    features: np.ndarray, labels: np.ndarray, theta: np.ndarray, config: VqcConfig
) -> float:
    return DatasetObjective(features, labels, config)(theta)


def predict(x: np.ndarray, theta: np.ndarray, config: VqcConfig) -> int:
    # argmax breaks ties toward the smallest class index
    return int(np.argmax(class_probabilities(x, theta, config)))


def predict_batch(X: np.ndarray, theta: np.ndarray, config: VqcConfig) -> np.ndarray:
    probs = class_probabilities_batch(encode_features(X, config), theta, config)
    return np.argmax(probs, axis=1)


def accuracy(features: np.ndarray, labels: np.ndarray, theta: np.ndarray, config: VqcConfig) -> float:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[0] == 0:
        raise ValueError("empty dataset")
    preds = predict_batch(features, theta, config)
    return float(np.mean(preds == np.asarray(labels, dtype=int)))
