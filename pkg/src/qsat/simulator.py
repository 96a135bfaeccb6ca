"""Dense statevector simulation of QAOA on k-SAT instances, and angle training.

States of several instances on the same number of qubits are evolved together
as rows of one ``(batch, 2**n)`` array.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .qaoa import QaoaAngles
from .sat import CnfInstance, unsat_count_vector

log = logging.getLogger(__name__)

__all__ = [
    "Statevector",
    "TrainConfig",
    "TrainResult",
    "run_qaoa",
    "success_probability",
    "success_probabilities",
    "empirical_mean_success",
    "mean_success_and_gradient",
    "optimize_angles",
]


@dataclass(frozen=True, eq=False)
class Statevector:
    amplitudes: np.ndarray
    n: int

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _prepared(instances: Sequence[CnfInstance]):
    ns = {inst.n for inst in instances}
    if len(ns) != 1:
        raise ValueError("all instances in a batch must have the same n")
    n = ns.pop()
    counts = np.stack([unsat_count_vector(inst) for inst in instances])
    return n, counts


def _evolve(n: int, counts: np.ndarray, angles: QaoaAngles, keep: bool = False):
    """Evolve the uniform state; optionally keep the state after every layer."""
    batch = counts.shape[0]
    psi = np.full((batch, 1 << n), 2.0 ** (-n / 2), dtype=complex)
    history = [psi.copy()] if keep else None
    top = int(counts.max()) if counts.size else 0
    levels = np.arange(top + 1)
    for beta, gamma in zip(angles.beta, angles.gamma):
        psi *= np.exp(-0.5j * gamma * levels)[counts]
        kernels.apply_mixer(psi, n, beta)
        if keep:
            history.append(psi.copy())
    return psi, history


def run_qaoa(instance: CnfInstance, angles: QaoaAngles) -> Statevector:
    """Depth-p QAOA state: layer j applies exp(-i gamma_j/2 H) then exp(-i beta_j/2 X) on every qubit."""
    n, counts = _prepared([instance])
    psi, _ = _evolve(n, counts, angles)
    return Statevector(psi[0], n)


def success_probabilities(instances: Sequence[CnfInstance], angles: QaoaAngles) -> np.ndarray:
    """Success probability of each instance (all must share n)."""
    n, counts = _prepared(instances)
    psi, _ = _evolve(n, counts, angles)
    probs = np.sum(np.abs(psi) ** 2 * (counts == 0), axis=1)
    return np.clip(probs, 0.0, 1.0)


def success_probability(instance: CnfInstance, angles: QaoaAngles) -> float:
    return float(success_probabilities([instance], angles)[0])


def empirical_mean_success(instances: Sequence[CnfInstance], angles: QaoaAngles) -> tuple[float, float]:
    """Sample mean and standard error of the success probability."""
    if len(instances) == 0:
        raise ValueError("need at least one instance")
    by_n: dict[int, list[int]] = {}
    for i, inst in enumerate(instances):
        by_n.setdefault(inst.n, []).append(i)
    probs = np.empty(len(instances))
    for idx in by_n.values():
        probs[idx] = success_probabilities([instances[i] for i in idx], angles)
    stderr = probs.std(ddof=1) / math.sqrt(probs.size) if probs.size > 1 else 0.0
    return float(probs.mean()), float(stderr)


def mean_success_and_gradient(
    instances: Sequence[CnfInstance], angles: QaoaAngles, method: str = "adjoint", fd_step: float = 1e-4
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean success probability and its gradient with respect to (beta, gamma).

    ``method="adjoint"`` back-propagates through the circuit (exact, about
    three forward passes); ``method="fd"`` uses central finite differences.
    """
    n, counts = _prepared(instances)
    return _value_and_gradient(n, counts, angles, method, fd_step)


def _value_and_gradient(n, counts, angles, method="adjoint", fd_step=1e-4):
    if method == "fd":
        return _fd_gradient(n, counts, angles, fd_step)
    if method != "adjoint":
        raise ValueError(f"unknown gradient method {method!r}")
    batch = counts.shape[0]
    solved = counts == 0
    psi, _ = _evolve(n, counts, angles)
    value = float(np.mean(np.sum(np.abs(psi) ** 2 * solved, axis=1)))
    lam = psi * solved
    top = int(counts.max()) if counts.size else 0
    levels = np.arange(top + 1)
    p = angles.p
    g_beta, g_gamma = np.zeros(p), np.zeros(p)
    for j in range(p - 1, -1, -1):
        beta, gamma = angles.beta[j], angles.gamma[j]
        # d/dbeta of exp(-i beta/2 B) psi is (-i/2) B psi, B = sum_q X_q
        g_beta[j] = np.sum(np.vdot(lam, kernels.sum_x(psi, n)).imag)
        kernels.apply_mixer(psi, n, -beta)
        kernels.apply_mixer(lam, n, -beta)
        g_gamma[j] = np.vdot(lam, counts * psi).imag
        undo = np.exp(0.5j * gamma * levels)[counts]
        psi *= undo
        lam *= undo
    return value, g_beta / batch, g_gamma / batch


def _fd_gradient(n, counts, angles, step):
    def objective(beta, gamma):
        psi, _ = _evolve(n, counts, QaoaAngles(beta, gamma))
        return float(np.mean(np.sum(np.abs(psi) ** 2 * (counts == 0), axis=1)))

    beta, gamma = np.array(angles.beta), np.array(angles.gamma)
    value = objective(beta, gamma)
    gb, gg = np.zeros_like(beta), np.zeros_like(gamma)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = step
        gb[j] = (objective(beta + e, gamma) - objective(beta - e, gamma)) / (2 * step)
        gg[j] = (objective(beta, gamma + e) - objective(beta, gamma - e)) / (2 * step)
    return value, gb, gg


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    iterations: int = 200
    init_beta: float = 0.01
    init_gamma: float = -0.01
    instance_count: int = 100
    instance_size: int = 12
    gradient: str = "adjoint"
    fd_step: float = 1e-4
    tol: float = 1e-6
    max_halvings: int = 20

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainResult:
    angles: QaoaAngles
    objective: float
    initial_objective: float
    stalled: bool
    iterations: int
    log: list = field(default_factory=list)

    def log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "objective", "grad_norm", "step"])
        writer.writerows(self.log)
        return buf.getvalue()


def optimize_angles(
    instances: Sequence[CnfInstance],
    p: int,
    config: Optional[TrainConfig] = None,
    init: Optional[QaoaAngles] = None,
    freeze_gamma: bool = False,
) -> TrainResult:
    """Gradient ascent on the mean success probability over a fixed instance set.

    Each step tries ``angles + lr * grad``; if the objective does not improve
    the step is halved (up to ``max_halvings`` times). The learning rate is
    kept at the last accepted step size and allowed to grow by 1.5x after each
    success. Stops after ``config.iterations`` steps, when the gradient
    infinity-norm drops below ``config.tol``, or when backtracking fails
    (``stalled``).
    """
    config = config or TrainConfig()
    if init is None:
        init = QaoaAngles([config.init_beta] * p, [config.init_gamma] * p)
    beta, gamma = np.array(init.beta), np.array(init.gamma)
    n, counts = _prepared(instances)
    lr = config.learning_rate

    def evaluate(b, g):
        return _value_and_gradient(n, counts, QaoaAngles(b, g), config.gradient, config.fd_step)

    value, gb, gg = evaluate(beta, gamma)
    if freeze_gamma:
        gg = np.zeros_like(gg)
    initial = value
    rows = []
    stalled = False
    it = 0
    for it in range(1, config.iterations + 1):
        grad_norm = max(np.abs(gb).max(), np.abs(gg).max())
        if grad_norm < config.tol:
            it -= 1
            break
        step = lr
        for _ in range(config.max_halvings + 1):
            nb, ng = beta + step * gb, gamma + step * gg
            new_value, nbg, ngg = evaluate(nb, ng)
            if new_value > value:
                break
            step /= 2
        else:
            stalled = True
            rows.append((it, value, grad_norm, 0.0))
            log.info("backtracking exhausted at iteration %d", it)
            break
        beta, gamma, value = nb, ng, new_value
        gb, gg = nbg, (np.zeros_like(ngg) if freeze_gamma else ngg)
        rows.append((it, value, grad_norm, step))
        lr = step * 1.5
    return TrainResult(QaoaAngles(beta, gamma), value, initial, stalled, it, rows)
