"""Hamming-weight-squared QAOA warm-up model.

One QAOA layer with cost ``(Hamming weight)**2`` and angle ``gamma = gamma_tilde / n``
has amplitude ``<0...0|psi>`` given by a binomial sum. Its leading behaviour
``(1/n) log(e^{i beta n / 2} amplitude)`` is obtained from the critical point
``theta*`` of a one-variable function ``Phi``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .mnsum import DivergenceError

__all__ = [
    "ToyParams",
    "amplitude_exact",
    "toy_fixed_point",
    "toy_phi",
    "toy_exponent",
    "toy_exponent_first_order",
]

MAX_ITER = 10_000
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class ToyParams:
    beta: float
    gamma_tilde: float
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def gamma(self) -> float:
        return self.gamma_tilde / self.n


def amplitude_exact(n: int, beta: float, gamma: float) -> complex:
    """``2**(-n/2) sum_k C(n,k) cos(beta/2)**(n-k) (-i sin(beta/2))**k exp(-i gamma k**2 / 2)``.

    The terms cancel heavily (the largest is ``((|cos|+|sin|)/sqrt 2)**n``), so the
    O(n) sum is carried out in arbitrary precision with enough guard digits.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    cb, sb = math.cos(beta / 2), math.sin(beta / 2)
    guard = n * (math.log10(abs(cb) + abs(sb)) + 0.5 * math.log10(2.0))
    with mpmath.workdps(30 + max(0, math.ceil(guard))):
        c = mpmath.mpf(cb)
        s = mpmath.mpc(0, -sb)
        g = mpmath.mpf(gamma)
        total = mpmath.mpc(0)
        binom = mpmath.mpf(1)
        for k in range(n + 1):
            total += binom * c ** (n - k) * s**k * mpmath.expj(-g * k * k / 2)
            binom = binom * (n - k) / (k + 1)
        total *= mpmath.mpf(2) ** (-mpmath.mpf(n) / 2)
        return complex(total)


def _scale(gamma_tilde: float) -> complex:
    return cmath.sqrt(-0.5j * gamma_tilde)


def toy_fixed_point(beta: float, gamma_tilde: float, eps: float = 1e-12) -> complex:
    """Critical point theta* of Phi, found by the undamped fixed-point iteration from 0.

    Negative ``gamma_tilde`` is handled by the conjugation symmetry
    ``theta*(beta, g) = conj(theta*(-beta, -g))``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if gamma_tilde < 0:
        return toy_fixed_point(-beta, -gamma_tilde, eps).conjugate()
    if gamma_tilde == 0:
        return 0j
    a = _scale(gamma_tilde)
    pref = -1j * cmath.sqrt(-2j * gamma_tilde) * math.sin(beta / 2)
    cb, sb = math.cos(beta / 2), math.sin(beta / 2)
    theta = 0j
    for _ in range(MAX_ITER):
        e = cmath.exp(theta * a)
        new = pref * e / (cb - 1j * sb * e)
        if not cmath.isfinite(new):
            raise DivergenceError("toy iteration produced a non-finite value", np.array([theta]))
        if abs(new - theta) < eps:
            return new
        theta = new
    raise DivergenceError("toy iteration did not converge", np.array([theta]), MAX_ITER)


def toy_phi(theta: complex, beta: float, gamma_tilde: float) -> complex:
    """``-log2/2 - i beta/2 - theta**2/4 + log(e^{i beta/2}(cos(beta/2) - i sin(beta/2) e^{theta a}))``."""
    a = _scale(gamma_tilde)
    inner = cmath.exp(0.5j * beta) * (math.cos(beta / 2) - 1j * math.sin(beta / 2) * cmath.exp(theta * a))
    return -LOG2 / 2 - 0.5j * beta - theta * theta / 4 + cmath.log(inner)


def toy_exponent(beta: float, gamma_tilde: float) -> complex:
    """Limit of ``(1/n) log(e^{i beta n/2} amplitude_exact(n, beta, gamma_tilde/n))``."""
    theta = toy_fixed_point(beta, gamma_tilde)
    return 0.5j * beta + toy_phi(theta, beta, gamma_tilde)


def toy_exponent_first_order(beta: float, gamma_tilde: float) -> complex:
    return -LOG2 / 2 + 0.5j * math.sin(beta / 2) ** 2 * cmath.exp(1j * beta) * gamma_tilde
