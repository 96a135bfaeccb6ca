"""Generalized multinomial sums and their saddle-point exponent.

A generalized multinomial sum is

    S(n) = sum_{(n_s): sum n_s = n} multinomial(n; n_s) prod_s b_s^{n_s}
           * exp(n * sum_a c_a * ((1/n) sum_s A[a, s] n_s) ** 2**q)

Its exponential growth rate lim (1/n) log S(n) is obtained from the fixed point
of z -> -2**q * grad F(z) ** (2**q - 1), where

    F(z) = log sum_s b_s exp(sum_a A[a, s] (-c_a) ** (1/2**q) z_a).

All complex roots and logarithms use the principal branch.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

log = logging.getLogger(__name__)

__all__ = [
    "MultinomialSpec",
    "SubsetStructure",
    "FixedPointResult",
    "SizeError",
    "SingularityError",
    "DivergenceError",
    "PreconditionError",
    "ConsistencyError",
    "principal_root",
    "direct_sum",
    "log_direct_sum",
    "f_value",
    "f_grad",
    "f_and_grad",
    "fixed_point_small_c",
    "fixed_point_damped",
    "scaling_exponent",
    "scaling_exponent_forms",
    "small_c_exponent",
    "rephase",
    "spec_to_json",
    "spec_from_json",
]

ENUMERATION_LIMIT = 10**8
ABS_SWITCH = 1e-300


class SizeError(ValueError):
    """Raised when an enumeration or memory guard is exceeded."""


class SingularityError(ArithmeticError):
    """Raised when the argument of the logarithm in F vanishes."""


class DivergenceError(ArithmeticError):
    """Raised when a fixed-point iteration produces a non-finite iterate."""

    def __init__(self, message: str, last_finite: Optional[np.ndarray] = None, iterations: int = 0):
        super().__init__(message)
        self.last_finite = last_finite
        self.iterations = iterations


class PreconditionError(ValueError):
    pass


class ConsistencyError(ArithmeticError):
    """Two mathematically equivalent evaluations disagree beyond tolerance."""


@dataclass(frozen=True)
class SubsetStructure:
    """Describes an ``A`` matrix of the form ``A[a, s] = scale[a] / 2 * [subset[a] monochromatic in s]``.

    ``n_bits`` is the length of the bitstrings ``s``; ``subsets`` holds one
    bitmask per row. Used by the sum-over-subsets fast path.
    """

    n_bits: int
    subsets: np.ndarray
    scale: np.ndarray

    def dense(self) -> np.ndarray:
        s = np.arange(1 << self.n_bits)
        masks = self.subsets[:, None]
        inside = s[None, :] & masks
        mono = (inside == 0) | (inside == masks)
        return 0.5 * self.scale[:, None] * mono


@dataclass(frozen=True, eq=False)
class MultinomialSpec:
    """Data ``(q, A, b, c)`` of a generalized multinomial sum.

    ``A`` has shape ``(a_count, s_count)``. It may be omitted when ``structure``
    is given, in which case it is materialized on first use.
    """

    q: int
    b: np.ndarray
    c: np.ndarray
    A: Optional[np.ndarray] = None
    structure: Optional[SubsetStructure] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        b = np.asarray(self.b, dtype=complex).ravel()
        c = np.asarray(self.c, dtype=complex).ravel()
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if self.A is not None:
            A = np.atleast_2d(np.asarray(self.A, dtype=complex))
            object.__setattr__(self, "A", A)
            if A.shape != (c.size, b.size):
                raise ValueError(f"A has shape {A.shape}, expected {(c.size, b.size)}")
        elif self.structure is None:
            raise ValueError("either A or structure is required")
        elif self.structure.subsets.size != c.size or (1 << self.structure.n_bits) != b.size:
            raise ValueError("structure does not match b and c")
        if int(self.q) < 1:
            raise ValueError("q must be >= 1")
        if c.size < 1 or b.size < 1:
            raise ValueError("a_count and s_count must be >= 1")
        total = b.sum()
        if abs(total - 1) > 1e-12:
            raise ValueError(f"sum of b must be 1, got {total}")

    @property
    def a_count(self) -> int:
        return self.c.size

    @property
    def s_count(self) -> int:
        return self.b.size

    @property
    def power(self) -> int:
        return 1 << self.q

    def matrix(self) -> np.ndarray:
        if self.A is not None:
            return self.A
        if "A" not in self._cache:
            self._cache["A"] = self.structure.dense()
        return self._cache["A"]

    def roots(self) -> np.ndarray:
        """Principal ``(-c_a) ** (1/2**q)``."""
        if "roots" not in self._cache:
            self._cache["roots"] = principal_root(-self.c, self.power)
        return self._cache["roots"]

    def scaled(self, t: complex) -> "MultinomialSpec":
        return MultinomialSpec(self.q, self.b, t * self.c, self.A, self.structure)


def principal_root(x, degree: int) -> np.ndarray:
    """Principal ``degree``-th root with arg in (-pi/degree, pi/degree]."""
    x = np.asarray(x, dtype=complex)
    # -0.0 imaginary parts would otherwise put negative reals at arg -pi
    x = np.where(x.imag == 0, x.real + 0j, x)
    return np.abs(x) ** (1.0 / degree) * np.exp(1j * np.angle(x) / degree)


# -- direct evaluation -------------------------------------------------------

def _compositions(n: int, parts: int, chunk: int = 1 << 18):
    """Yield arrays of shape (m, parts) enumerating compositions of n."""
    if parts == 1:
        yield np.array([[n]], dtype=np.int64)
        return
    bars = itertools.combinations(range(n + parts - 1), parts - 1)
    while True:
        block = np.array(list(itertools.islice(bars, chunk)), dtype=np.int64)
        if block.size == 0:
            return
        block = block.reshape(-1, parts - 1)
        edges = np.concatenate(
            [np.full((len(block), 1), -1), block, np.full((len(block), 1), n + parts - 1)], axis=1
        )
        yield np.diff(edges, axis=1) - 1


def _log_terms(spec: MultinomialSpec, n: int, counts: np.ndarray) -> np.ndarray:
    b = spec.b
    logb = np.log(np.where(b == 0, 1.0, b))
    logw = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + counts @ logb
    zero_hit = (counts[:, b == 0] > 0).any(axis=1)
    lin = counts @ spec.matrix().T / n
    logw = logw + n * (lin**spec.power) @ spec.c
    return np.where(zero_hit, -np.inf + 0j, logw)


def log_direct_sum(spec: MultinomialSpec, n: int) -> complex:
    """Principal log of the sum, accumulated with a common scale to avoid overflow."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0j
    if math.comb(n + spec.s_count - 1, spec.s_count - 1) > ENUMERATION_LIMIT:
        raise SizeError(f"too many compositions of {n} into {spec.s_count} parts")
    blocks = [_log_terms(spec, n, counts) for counts in _compositions(n, spec.s_count)]
    logt = np.concatenate(blocks)
    finite = np.isfinite(logt.real)
    if not finite.any():
        return complex(-np.inf)
    logt = logt[finite]
    shift = logt.real.max()
    terms = np.exp(logt - shift)
    total = complex(math.fsum(terms.real), math.fsum(terms.imag))
    if total == 0:
        return complex(-np.inf)
    return shift + np.log(total)


def direct_sum(spec: MultinomialSpec, n: int) -> complex:
    """Evaluate S_q(A, b, c; n) by enumerating every composition of n."""
    if n == 0:
        return 1 + 0j
    return complex(np.exp(log_direct_sum(spec, n)))


# -- F and its gradient ------------------------------------------------------

def _weights(spec: MultinomialSpec, z: np.ndarray):
    w = spec.roots() * np.asarray(z, dtype=complex)
    u = w @ spec.matrix()
    shift = u.real.max()
    e = spec.b * np.exp(u - shift)
    total = e.sum()
    if not np.isfinite(total) or abs(total) == 0 or math.log(abs(total)) + shift < math.log(1e-14):
        raise SingularityError("log argument of F vanishes")
    return e, total, shift


def f_value(spec: MultinomialSpec, z) -> complex:
    _, total, shift = _weights(spec, z)
    return complex(shift + np.log(total))


def f_grad(spec: MultinomialSpec, z) -> np.ndarray:
    e, total, _ = _weights(spec, z)
    return spec.roots() * (spec.matrix() @ e) / total


def f_and_grad(spec: MultinomialSpec, z) -> tuple[complex, np.ndarray]:
    e, total, shift = _weights(spec, z)
    return complex(shift + np.log(total)), spec.roots() * (spec.matrix() @ e) / total


# -- fixed point -------------------------------------------------------------

@dataclass
class FixedPointResult:
    z: np.ndarray
    iterations: int
    residual: float
    converged: bool
    eps: float = 1e-10


GradFn = Callable[[np.ndarray], np.ndarray]


def _proposal(grad: np.ndarray, power: int) -> np.ndarray:
    return power * (-grad) ** (power - 1)


def _residual(z: np.ndarray, proposal: np.ndarray) -> float:
    if z.size == 0:
        return 0.0
    mag = np.abs(z)
    err = np.abs(z - proposal)
    rel = np.where(mag < ABS_SWITCH, err, err / np.maximum(mag, ABS_SWITCH))
    return float(rel.max())


def fixed_point_damped(
    spec: MultinomialSpec,
    n_iter: int = 1000,
    eps: float = 1e-10,
    z_init=None,
    rho: float = 0.5,
    grad_fn: Optional[GradFn] = None,
) -> FixedPointResult:
    """Damped iteration z <- rho z + (1 - rho) * 2**q (-grad F(z)) ** (2**q - 1).

    ``grad_fn`` replaces :func:`f_grad` (e.g. by a structured fast path).
    Returns the last iterate; ``converged`` is set when its relative
    fixed-point residual is below ``eps``.
    """
    if n_iter < 1 or eps <= 0:
        raise ValueError("n_iter must be >= 1 and eps > 0")
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    grad_fn = grad_fn or (lambda z: f_grad(spec, z))
    power = spec.power
    z = np.zeros(spec.a_count, dtype=complex) if z_init is None else np.array(z_init, dtype=complex)
    last_finite = z.copy()
    for i in range(n_iter):
        try:
            prop = _proposal(grad_fn(z), power)
        except SingularityError as exc:
            raise DivergenceError(str(exc), last_finite, i) from exc
        if not np.all(np.isfinite(prop)):
            raise DivergenceError("non-finite fixed-point iterate", last_finite, i)
        res = _residual(z, prop)
        if res < eps:
            return FixedPointResult(z, i, res, True, eps)
        last_finite = z
        z = rho * z + (1 - rho) * prop if rho else prop
    prop = _proposal(grad_fn(z), power)
    if not np.all(np.isfinite(prop)):
        raise DivergenceError("non-finite fixed-point iterate", last_finite, n_iter)
    res = _residual(z, prop)
    return FixedPointResult(z, n_iter, res, res < eps, eps)


def fixed_point_small_c(
    spec: MultinomialSpec, n_iter: int = 1000, eps: float = 1e-10, grad_fn: Optional[GradFn] = None
) -> FixedPointResult:
    """Undamped iteration from z = 0; the proven route for small c."""
    return fixed_point_damped(spec, n_iter, eps, None, 0.0, grad_fn)


# -- exponent ----------------------------------------------------------------

def scaling_exponent_forms(
    spec: MultinomialSpec, fp: FixedPointResult, f_and_grad_fn=None
) -> tuple[complex, complex]:
    """Both algebraic forms of the exponent at the fixed point.

    Returns ``(F + (2**q - 1) sum grad**2**q, F - (1 - 2**-q) sum z grad)``.
    """
    first, second, _ = _forms(spec, fp, f_and_grad_fn)
    return first, second


def _forms(spec, fp, f_and_grad_fn):
    if not fp.converged:
        raise PreconditionError("fixed point did not converge")
    fv, g = (f_and_grad_fn or (lambda z: f_and_grad(spec, z)))(fp.z)
    power = spec.power
    tail1 = (power - 1) * np.sum(g**power)
    tail2 = (1 - 1 / power) * np.sum(fp.z * g)
    # magnitude of the largest constituent: the forms can only agree relative to it
    scale = max(abs(fv), abs(tail1), abs(tail2), abs(fv + tail1))
    return complex(fv + tail1), complex(fv - tail2), scale


def scaling_exponent(spec: MultinomialSpec, fp: FixedPointResult, f_and_grad_fn=None) -> complex:
    """``F(z*) + (2**q - 1) sum grad F(z*) ** 2**q``, checked against the second form.

    The forms must agree to 1e-9 relative to the largest of ``F(z*)`` and the
    two correction sums (the exponent itself may cancel to far below them).
    """
    first, second, scale = _forms(spec, fp, f_and_grad_fn)
    if abs(first - second) > 1e-9 * scale + 1e-15:
        raise ConsistencyError(f"exponent forms disagree: {first} vs {second}")
    return first


def small_c_exponent(spec: MultinomialSpec) -> complex:
    """Lowest-order exponent sum_a c_a (sum_s b_s A[a, s]) ** 2**q."""
    return complex(np.sum(spec.c * (spec.matrix() @ spec.b) ** spec.power))


# -- rephasing ---------------------------------------------------------------

def _rephase_phases(arg: float, q: int) -> tuple[float, float, bool]:
    """Return (phi_0, phi_1, edge) for a row whose coupling argument is ``arg``."""
    period = math.pi / 2 ** (q - 1)
    half = period / 2
    m = math.ceil((arg - half) / period)
    theta = arg - m * period
    if abs(theta + half) < 1e-12:
        theta, m = half, m - 1
    if abs(theta - half) < 1e-12:
        shift = math.pi / 2 ** (q + 2)
        return -m * period - shift, -(m + 1) * period + shift, True
    return -m * period, -m * period, False


def rephase(spec: MultinomialSpec) -> MultinomialSpec:
    """Split each row into two phase-shifted copies without changing S(n).

    Every nonzero row ``a`` becomes rows ``(a, 0), (a, 1)`` (adjacent in the
    output) whose coupling arguments lie strictly inside (-pi/2**q, pi/2**q).
    Rows with vanishing coupling are passed through unchanged.
    """
    q, power = spec.q, spec.power
    coupling = spec.roots() * (spec.matrix() @ spec.b)
    factors: list[complex] = []
    origin: list[int] = []
    for a, value in enumerate(coupling):
        if value == 0:
            log.debug("row %d has zero coupling; passed through", a)
            factors.append(1.0)
            origin.append(a)
            continue
        phi0, phi1, _ = _rephase_phases(float(np.angle(value)), q)
        denom = np.exp(1j * power * phi0) + np.exp(1j * power * phi1)
        norm = principal_root(denom, power)
        factors.extend([np.exp(1j * phi0) / norm, np.exp(1j * phi1) / norm])
        origin.extend([a, a])
    origin_arr = np.array(origin)
    factor_arr = np.array(factors, dtype=complex)
    c = spec.c[origin_arr]
    if spec.A is not None:
        return MultinomialSpec(q, spec.b, c, spec.A[origin_arr] * factor_arr[:, None])
    st = spec.structure
    structure = SubsetStructure(st.n_bits, st.subsets[origin_arr], st.scale[origin_arr] * factor_arr)
    return MultinomialSpec(q, spec.b, c, structure=structure)


# -- serialization -----------------------------------------------------------

def _pairs(x) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(x, dtype=complex).ravel()]


def _unpairs(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def spec_to_json(spec: MultinomialSpec) -> str:
    A = spec.matrix()
    doc = {
        "q": spec.q,
        "a_count": spec.a_count,
        "s_count": spec.s_count,
        "b": _pairs(spec.b),
        "c": _pairs(spec.c),
        "A": [_pairs(row) for row in A],
    }
    return json.dumps(doc)


def spec_from_json(text: str) -> MultinomialSpec:
    doc = json.loads(text)
    A = np.array([_unpairs(row) for row in doc["A"]]).reshape(doc["a_count"], doc["s_count"])
    return MultinomialSpec(int(doc["q"]), _unpairs(doc["b"]), _unpairs(doc["c"]), A)
