"""Dataset condensation by per-class mean-embedding matching under a fixed
random projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CondenseSpec:
    images_per_class: int
    steps: int = 100
    learning_rate: float = 0.1
    batch_size: int = 64
    embedding_dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.images_per_class < 1:
            raise ValueError("images_per_class must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class CondenseResult:
    synthetic: np.ndarray  # (C*m, d), values in [0, 1]
    labels: np.ndarray  # (C*m,)
    loss_history: np.ndarray  # (steps, C) per-class loss trace
    projection: np.ndarray  # (d, e)


def stability_bound(W: np.ndarray, images_per_class: int) -> float:
    """Largest learning rate guaranteeing non-increasing full-batch loss."""
    top_sv = np.linalg.svd(W, compute_uv=False)[0]
    return images_per_class / (2.0 * top_sv**2)


def condense(
    X: np.ndarray,
    y: np.ndarray,
    spec: CondenseSpec,
    projection: np.ndarray | None = None,
) -> CondenseResult:
    """Build C*m synthetic rows whose class-mean embeddings track the real data.

    Initializes from real samples (first m per class under a seeded shuffle),
    then per step and class moves the synthetic block along the matching-loss
    gradient and clips into [0, 1]. `projection` overrides the random W
    (test hook).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    n, d = X.shape
    classes = np.unique(y)
    m = spec.images_per_class
    rng = np.random.default_rng(spec.seed)

    order = rng.permutation(n)
    class_rows = {c: order[y[order] == c] for c in classes}
    for c in classes:
        if len(class_rows[c]) < m:
            raise ValueError(f"class {c} has {len(class_rows[c])} samples, need {m}")

    if projection is None:
        W = rng.normal(0.0, 1.0 / np.sqrt(spec.embedding_dim), (d, spec.embedding_dim))
    else:
        W = np.asarray(projection, dtype=float)

    blocks = {c: np.clip(X[class_rows[c][:m]].copy(), 0.0, 1.0) for c in classes}
    losses = np.zeros((spec.steps, len(classes)))

    for t in range(spec.steps):
        for ci, c in enumerate(classes):
            rows = class_rows[c]
            b = min(spec.batch_size, len(rows))
            batch = X[rng.permutation(rows)[:b]]
            mu_real = batch.mean(axis=0) @ W
            mu_syn = blocks[c].mean(axis=0) @ W
            delta = mu_real - mu_syn
            losses[t, ci] = float(delta @ delta)
            grad = -(2.0 / m) * delta @ W.T  # same gradient for every synthetic row
            blocks[c] = np.clip(blocks[c] - spec.learning_rate * grad, 0.0, 1.0)

    synthetic = np.concatenate([blocks[c] for c in classes])
    labels = np.repeat(classes, m)
    return CondenseResult(synthetic, labels, losses, W)
