"""Random 2**q-SAT QAOA as a generalized multinomial sum.

Bitstrings ``s`` of length ``2p+1`` and subsets ``J`` of ``{0, ..., 2p}`` are
both encoded as integers with bit ``j`` standing for position ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from . import kernels
from .mnsum import (
    ConsistencyError,
    DivergenceError,
    FixedPointResult,
    MultinomialSpec,
    SingularityError,
    SubsetStructure,
    fixed_point_damped,
    rephase,
    scaling_exponent,
)

__all__ = [
    "QaoaAngles",
    "QaoaKsatProblem",
    "SolverOptions",
    "ExponentResult",
    "b_coeffs",
    "c_coeffs",
    "build_spec",
    "qaoa_exponent",
    "p1_exact",
    "local_scaling_exponent",
    "small_gamma_exponent",
    "sos_sum_alpha",
    "sos_sum_s",
    "fast_f_and_grad",
    "log2_of_power",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class QaoaAngles:
    beta: tuple
    gamma: tuple

    def __init__(self, beta: Sequence[float], gamma: Sequence[float]):
        beta = tuple(float(x) for x in np.atleast_1d(beta))
        gamma = tuple(float(x) for x in np.atleast_1d(gamma))
        if len(beta) != len(gamma) or len(beta) < 1:
            raise ValueError("beta and gamma must be nonempty and of equal length")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def p(self) -> int:
        return len(self.beta)

    def to_dict(self) -> dict:
        return {"p": self.p, "beta": list(self.beta), "gamma": list(self.gamma)}

    @classmethod
    def from_dict(cls, doc: dict) -> "QaoaAngles":
        angles = cls(doc["beta"], doc["gamma"])
        if "p" in doc and int(doc["p"]) != angles.p:
            raise ValueError("p does not match the angle lists")
        return angles


def log2_of_power(k: int) -> int:
    """Return q with k = 2**q, or raise ValueError."""
    if k < 1 or k & (k - 1):
        raise ValueError(f"k = {k} is not a power of two")
    return k.bit_length() - 1


@dataclass(frozen=True)
class QaoaKsatProblem:
    k: int
    r: float
    angles: QaoaAngles

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")

    @property
    def q(self) -> int:
        return log2_of_power(self.k)


# -- coefficients ------------------------------------------------------------

def b_coeffs(angles: QaoaAngles) -> np.ndarray:
    """``b_s = B_s / 2`` over the ``2**(2p+1)`` bitstrings."""
    p = angles.p
    L = 2 * p + 1
    s = np.arange(1 << L)
    bit = lambda j: (s >> j) & 1  # noqa: E731
    out = np.where(bit(0) != bit(p), -0.5, 0.5).astype(complex)
    for j, beta in enumerate(angles.beta):
        cos, isin = math.cos(beta / 2), 1j * math.sin(beta / 2)
        for left, right in ((j, j + 1), (2 * p - j, 2 * p - j - 1)):
            out *= np.where(bit(left) == bit(right), cos, isin)
    return out


def _subset_coefficient(mask: int, angles: QaoaAngles, r: float) -> complex:
    p = angles.p
    value = complex(-r if (mask >> p) & 1 else r)
    for j in range(2 * p + 1):
        if not (mask >> j) & 1 or j == p:
            continue
        if j < p:
            value *= np.exp(-0.5j * angles.gamma[j]) - 1
        else:
            value *= np.exp(0.5j * angles.gamma[2 * p - j]) - 1
    return value


def c_coeffs(angles: QaoaAngles, r: float) -> np.ndarray:
    """``c_J`` for every subset bitmask ``J`` of ``{0, ..., 2p}``; entry 0 (empty set) is 0."""
    L = 2 * angles.p + 1
    out = np.zeros(1 << L, dtype=complex)
    for mask in range(1, 1 << L):
        out[mask] = _subset_coefficient(mask, angles, r)
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.array([bin(int(v)).count("1") for v in x])


def build_spec(problem: QaoaKsatProblem) -> MultinomialSpec:
    """The multinomial-sum data whose exponent (plus a prefactor) gives the success probability.

    Rows are the subsets with at least two elements, in increasing bitmask
    order; ``A[J, s] = 1/2`` when ``s`` is constant on ``J``.
    """
    angles = problem.angles
    L = 2 * angles.p + 1
    masks = np.arange(1 << L)
    rows = masks[_popcount(masks) >= 2]
    c = c_coeffs(angles, problem.r)[rows]
    structure = SubsetStructure(L, rows, np.ones(rows.size, dtype=complex))
    return MultinomialSpec(problem.q, b_coeffs(angles), c, structure=structure)


# -- sum-over-subsets kernels ------------------------------------------------

def _as_table(v) -> tuple[np.ndarray, int]:
    v = np.array(v, dtype=complex)
    L = v.size.bit_length() - 1
    if v.ndim != 1 or L < 1 or v.size != 1 << L:
        raise ValueError("input length must be 2**L with L >= 1")
    return v, L


def sos_sum_alpha(v) -> np.ndarray:
    """For each bitstring s: sum of v over subsets of zeros(s) and of ones(s), empty set once."""
    v, L = _as_table(v)
    empty = v[0]
    kernels.zeta_subset(v, L)
    complement = v[::-1]  # index ~s reversed order: (2**L - 1) - s
    return v + complement - empty


def sos_sum_s(v) -> np.ndarray:
    """For each subset alpha: sum of v_s over s constant on alpha; the empty set counts sum(v) once."""
    v, L = _as_table(v)
    total = v.sum()
    ones = v.copy()
    kernels.zeta_superset(ones, L)
    zeros = v[::-1].copy()
    kernels.zeta_superset(zeros, L)
    out = ones + zeros
    out[0] -= total
    return out


def fast_f_and_grad(spec: MultinomialSpec, z) -> tuple[complex, np.ndarray]:
    """F(z) and grad F(z) for a subset-structured spec in O(L 2**L) time.

    ``z`` is indexed like the spec's rows. Numerically equivalent to
    :func:`qsat.mnsum.f_and_grad`.
    """
    st = spec.structure
    if st is None:
        raise ValueError("spec has no subset structure")
    z = np.asarray(z, dtype=complex)
    w = spec.roots() * st.scale
    v = np.zeros(1 << st.n_bits, dtype=complex)
    np.add.at(v, st.subsets, w * z)
    u = 0.5 * sos_sum_alpha(v)
    shift = u.real.max()
    e = spec.b * np.exp(u - shift)
    total = e.sum()
    if not np.isfinite(total) or abs(total) == 0 or math.log(abs(total)) + shift < math.log(1e-14):
        raise SingularityError("log argument of F vanishes")
    numer = sos_sum_s(e)[st.subsets]
    return complex(shift + np.log(total)), w * 0.5 * numer / total


def _fast_grad(spec: MultinomialSpec):
    return lambda z: fast_f_and_grad(spec, z)[1]


# -- exponent ----------------------------------------------------------------

@dataclass
class SolverOptions:
    """Fixed-point solver settings.

    ``rho=None`` runs the undamped iteration and retries with ``fallback_rho``
    damping if it fails to converge.
    """

    rho: Optional[float] = None
    eps: float = 1e-10
    max_iter: int = 1000
    fallback_rho: float = 0.5
    fast: bool = True


@dataclass
class ExponentResult:
    exponent_ln: complex
    iterations: int
    residual: float
    converged: bool
    prefactor: float
    fixed_point: Optional[FixedPointResult] = field(default=None, repr=False)

    @property
    def exponent_log2(self) -> float:
        return self.exponent_ln.real / LN2

    def to_record(self, problem: QaoaKsatProblem) -> dict:
        return {
            "k": problem.k,
            "p": problem.angles.p,
            "r": problem.r,
            "beta": list(problem.angles.beta),
            "gamma": list(problem.angles.gamma),
            "exponent_ln": {"re": self.exponent_ln.real, "im": self.exponent_ln.imag},
            "exponent_log2": self.exponent_log2,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }


def _prefactor(problem: QaoaKsatProblem) -> float:
    g = np.asarray(problem.angles.gamma)
    return -(2.0 ** -problem.k) * problem.r * (1 + 4 * np.sum(np.sin(g / 4) ** 2))


def qaoa_exponent(problem: QaoaKsatProblem, options: Optional[SolverOptions] = None) -> ExponentResult:
    """Natural-log scaling exponent of the instance-averaged success probability.

    Raises ``DivergenceError`` if no fixed point is found.
    """
    options = options or SolverOptions()
    spec = rephase(build_spec(problem))
    grad = _fast_grad(spec) if options.fast else None
    fg = (lambda z: fast_f_and_grad(spec, z)) if options.fast else None
    rhos = [options.rho] if options.rho is not None else [0.0, options.fallback_rho]
    fp = None
    error: Optional[Exception] = None
    for rho in rhos:
        try:
            fp = fixed_point_damped(spec, options.max_iter, options.eps, None, rho, grad)
        except DivergenceError as exc:
            error, fp = exc, None
            continue
        if fp.converged:
            break
    if fp is None or not fp.converged:
        if fp is not None:
            raise DivergenceError(
                f"fixed point not reached (residual {fp.residual:.3g})", fp.z, fp.iterations
            )
        raise error
    pre = _prefactor(problem)
    value = scaling_exponent(spec, fp, fg)
    return ExponentResult(pre + value, fp.iterations, fp.residual, True, pre, fp)


def small_gamma_exponent(q: int, p: int, r: float, beta: Sequence[float], gamma: Sequence[float]) -> float:
    """First-order expansion in gamma of the exponent (natural log)."""
    k = 1 << q
    beta = np.asarray(beta, dtype=float).reshape(p)
    gamma = np.asarray(gamma, dtype=float).reshape(p)
    total = 0.0
    for j in range(p):
        tail = beta[j:].sum()
        total += gamma[j] * math.sin(2 ** (q - 1) * tail) * math.cos(tail / 2) ** k
    return -(2.0**-k) * r - r * 2.0**-k * total


# -- exact p = 1 -------------------------------------------------------------

_LOSS_LIMIT = 1e-12

# The quadruple sum over counts (a, b, c, d), a + b + c + d = n, of
#   n!/(a! b! c! d!) ca^a sb^b (i s)^c (-i s)^d
#     * exp(rn [g4 (f(a+b) - f(a)) + cm f(a+c) + cp f(a+d)]),   f(j) = (j / 2n)^k,
# factorizes for fixed a into a convolution over c + d = n - a - b of
#   U_a[c] = (i s)^c e^{rn cm f(a+c)} / c!   and   V_a[d] = (-i s)^d e^{rn cp f(a+d)} / d!.


def _p1_constants(beta, gamma, sin, cos, expj):
    half = beta / 2
    ca, sb = cos(half) ** 2, sin(half) ** 2
    s = sin(beta) / 2
    g4 = 4 * sin(gamma / 4) ** 2
    return ca, sb, s, g4, 1 - expj(-gamma / 2), 1 - expj(gamma / 2)


def _xlogy(count, base):
    count = np.asarray(count)
    if base == 0:
        return np.where(count == 0, 0.0, -np.inf).astype(np.longdouble)
    return count.astype(np.longdouble) * np.log(np.abs(np.longdouble(base)))


def _p1_sum_longdouble(k, n, r, beta, gamma):
    """Return (sum, sum of absolute terms, log shift) in extended precision."""
    ld = np.longdouble
    ca, sb, s, g4, cm, cp = _p1_constants(
        ld(beta), ld(gamma), np.sin, np.cos, lambda x: np.cos(x) + 1j * np.sin(x)
    )
    idx = np.arange(n + 1)
    log_fact = np.concatenate([[0], np.cumsum(np.log(np.arange(1, n + 1, dtype=ld)))])
    f = np.concatenate([(idx.astype(ld) / (2 * n)) ** k, np.zeros(n + 1, dtype=ld)])
    rn = ld(r) * n
    # rows a, columns j = c (or d, or b); entries with a + j > n are masked out
    a, j = idx[:, None], idx[None, :]
    valid = a + j <= n
    base = _xlogy(j, s) - log_fact[j]
    flip = np.pi * (j % 2) if s < 0 else 0
    fa_j = f[a + j]
    log_u = np.where(valid, base + (rn * cm.real) * fa_j, -np.inf)
    log_v = np.where(valid, base + (rn * cp.real) * fa_j, -np.inf)
    shift_u = log_u.max(axis=1, keepdims=True)
    shift_v = log_v.max(axis=1, keepdims=True)
    mag_u, mag_v = np.exp(log_u - shift_u), np.exp(log_v - shift_v)
    quarter = np.pi / ld(2)
    u = mag_u * np.exp(1j * (quarter * j + flip + (rn * cm.imag) * fa_j))
    v = mag_v * np.exp(1j * (-quarter * j + flip + (rn * cp.imag) * fa_j))
    # conv[a, m] = sum_{c + d = m} u[a, c] v[a, d] for m <= n - a
    conv = np.zeros((n + 1, n + 1), dtype=u.dtype)
    abs_conv = np.zeros((n + 1, n + 1), dtype=ld)
    for row in range(n + 1):
        width = n - row + 1
        conv[row, :width] = np.convolve(u[row, :width], v[row, :width])[:width]
        abs_conv[row, :width] = np.convolve(mag_u[row, :width], mag_v[row, :width])[:width]
    # pair each (a, b) with m = n - a - b
    m = np.where(valid, n - a - j, 0)
    conv_ab = np.take_along_axis(conv, m, axis=1)
    abs_ab = np.take_along_axis(abs_conv, m, axis=1)
    logw = (
        log_fact[n] - log_fact[a] - log_fact[j] + _xlogy(a, ca) + _xlogy(j, sb)
        + rn * g4 * (fa_j - f[a]) + shift_u + shift_v
    )
    keep = valid & (abs_ab > 0) & np.isfinite(logw)
    mags = logw[keep] + np.log(abs_ab[keep])
    units = conv_ab[keep] / abs_ab[keep]
    shift = mags.max()
    weights = np.exp(mags - shift)
    return np.sum(weights * units), np.sum(weights), shift


def _p1_sum_mp(k, n, r, beta, gamma, dps):
    with mpmath.workdps(dps):
        ca, sb, s, g4, cm, cp = _p1_constants(mpmath.mpf(beta), mpmath.mpf(gamma), mpmath.sin, mpmath.cos, mpmath.expj)
        rn = mpmath.mpf(r) * n
        fact = [mpmath.factorial(i) for i in range(n + 1)]
        f = [(mpmath.mpf(i) / (2 * n)) ** k for i in range(n + 1)]
        i_s = mpmath.mpc(0, s)
        pow_is = [i_s**j for j in range(n + 1)]
        pow_mis = [(-i_s) ** j for j in range(n + 1)]
        total = mpmath.mpc(0)
        for a in range(n + 1):
            rest = n - a
            u = [pow_is[c] * mpmath.exp(rn * cm * f[a + c]) / fact[c] for c in range(rest + 1)]
            v = [pow_mis[d] * mpmath.exp(rn * cp * f[a + d]) / fact[d] for d in range(rest + 1)]
            outer = fact[n] / fact[a] * ca**a
            for b in range(rest + 1):
                m = rest - b
                conv = mpmath.fsum(u[c] * v[m - c] for c in range(m + 1))
                total += outer / fact[b] * sb**b * mpmath.exp(rn * g4 * (f[a + b] - f[a])) * conv
        return total


def p1_exact(k: int, n: int, r: float, beta: float, gamma: float) -> float:
    """Exact instance-averaged success probability of depth-1 QAOA on random k-SAT.

    The sum carries large cancellations between terms; it is evaluated in
    extended precision and re-evaluated in arbitrary precision when the
    estimated cancellation loss exceeds ~1e-12 relative.
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    pre = -(2.0**-k) * r * n * (1 + 4 * math.sin(gamma / 4) ** 2)
    total, abs_total, shift = _p1_sum_longdouble(k, n, r, beta, gamma)
    loss = float(abs_total / abs(total)) * float(np.finfo(np.longdouble).eps) if total != 0 else math.inf
    if loss > _LOSS_LIMIT:
        digits = 25 + (int(math.log10(float(abs_total) / abs(total))) if total != 0 else 10 * n)
        value = _p1_sum_mp(k, n, r, beta, gamma, max(digits, 30))
        with mpmath.workdps(30):
            result = complex(value * mpmath.exp(pre))
    else:
        result = complex(total * np.exp(np.longdouble(shift + pre)))
    if abs(result.imag) > 1e-9 * abs(result):
        raise ConsistencyError(f"imaginary residue {result.imag:.3g} in a probability {result.real:.3g}")
    return result.real


def local_scaling_exponent(k: int, n: int, r: float, beta: float, gamma: float) -> float:
    """``log(p1_exact(n + 1) / p1_exact(n))``."""
    return math.log(p1_exact(k, n + 1, r, beta, gamma) / p1_exact(k, n, r, beta, gamma))
