"""Optimizers: AQGD (parameter-shift + momentum), its DP variant, and SPSA."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AqgdSettings:
    maxiter: int = 100
    eta: float = 0.1
    momentum: float = 0.25
    tol: float = 1e-6
    param_tol: float = 1e-6
    averaging: int = 10

    def __post_init__(self):
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass(frozen=True)
class DpSettings:
    epsilon: float
    delta: float
    sensitivity: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if self.sensitivity < 0:
            raise ValueError("sensitivity must be >= 0")

    @property
    def noise_sigma(self) -> float:
        return self.sensitivity * math.sqrt(2.0 * math.log(1.25 / self.delta)) / self.epsilon


@dataclass
class OptimResult:
    theta_final: np.ndarray
    objective_final: float
    eval_count: int
    iterations_run: int
    objective_trace: np.ndarray = field(default_factory=lambda: np.array([]))


def _evaluate(f, thetas: np.ndarray) -> np.ndarray:
    many = getattr(f, "evaluate_many", None)
    if many is not None:
        values = np.asarray(many(thetas), dtype=float)
    else:
        values = np.array([float(f(t)) for t in thetas])
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("objective returned a non-finite value")
    return values


def parameter_shift_gradient(f, theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective value and analytic gradient from 2n+1 evaluations.

    gradient_i = (f(theta + pi/2 e_i) - f(theta - pi/2 e_i)) / 2
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    shifts = (math.pi / 2.0) * np.eye(n)
    points = np.concatenate([theta[None, :], theta + shifts, theta - shifts])
    values = _evaluate(f, points)
    grad = (values[1 : n + 1] - values[n + 1 :]) / 2.0
    return float(values[0]), grad


def _aqgd_core(
    f, theta0: np.ndarray, settings: AqgdSettings, noise_sigma: float, rng
) -> OptimResult:
    theta = np.asarray(theta0, dtype=float).copy()
    n = theta.size
    momentum_term = np.zeros(n)
    trace: list[float] = []
    eval_count = 0
    iterations = 0

    for _ in range(settings.maxiter):
        value, grad = parameter_shift_gradient(f, theta)
        eval_count += 2 * n + 1
        iterations += 1
        trace.append(value)

        if rng is not None:
            grad = grad + rng.normal(0.0, noise_sigma, n)

        momentum_term = settings.momentum * momentum_term + (1.0 - settings.momentum) * grad
        update = settings.eta * momentum_term
        theta = theta - update

        if float(np.max(np.abs(update))) < settings.param_tol:
            break
        if len(trace) >= settings.averaging + 1:
            prev_avg = float(np.mean(trace[-settings.averaging - 1 : -1]))
            cur_avg = float(np.mean(trace[-settings.averaging :]))
            if abs(cur_avg - prev_avg) < settings.tol:
                break

    return OptimResult(
        theta_final=theta,
        objective_final=trace[-1],
        eval_count=eval_count,
        iterations_run=iterations,
        objective_trace=np.array(trace),
    )


def aqgd_minimize(f, theta0: np.ndarray, settings: AqgdSettings) -> OptimResult:
    return _aqgd_core(f, theta0, settings, 0.0, None)


def dp_aqgd_minimize(
    f, theta0: np.ndarray, settings: AqgdSettings, dp: DpSettings, rng: np.random.Generator
) -> OptimResult:
    """AQGD with Gaussian gradient perturbation for (epsilon, delta)-DP."""
    return _aqgd_core(f, theta0, settings, dp.noise_sigma, rng)


def spsa_minimize(
    f,
    theta0: np.ndarray,
    maxiter: int,
    rng: np.random.Generator,
    a: float = 0.1,
    c: float = 0.1,
    A: float | None = None,
) -> OptimResult:
    """Simultaneous-perturbation approximation; 2 evaluations per iteration."""
    if maxiter < 1:
        raise ValueError("maxiter must be >= 1")
    if A is None:
        A = 0.1 * maxiter
    theta = np.asarray(theta0, dtype=float).copy()
    n = theta.size
    trace = []
    for k in range(maxiter):
        a_k = a / (k + 1 + A) ** 0.602
        c_k = c / (k + 1) ** 0.101
        delta = rng.integers(0, 2, n) * 2.0 - 1.0
        values = _evaluate(f, np.stack([theta + c_k * delta, theta - c_k * delta]))
        ghat = (values[0] - values[1]) / (2.0 * c_k) * delta
        theta = theta - a_k * ghat
        trace.append(float(values.mean()))
    return OptimResult(
        theta_final=theta,
        objective_final=trace[-1],
        eval_count=2 * maxiter,
        iterations_run=maxiter,
        objective_trace=np.array(trace),
    )
