"""Random k-SAT instances: sampling, evaluation, brute-force counting and DIMACS I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .mnsum import SizeError

__all__ = [
    "Literal",
    "CnfInstance",
    "DimacsError",
    "UnsupportedError",
    "MAX_BRUTE_FORCE_N",
    "THRESHOLDS",
    "sample_instance",
    "unsat_count",
    "unsat_count_vector",
    "count_solutions",
    "is_satisfiable",
    "threshold",
    "read_dimacs",
    "write_dimacs",
    "bits_from_index",
    "index_from_bits",
]

MAX_BRUTE_FORCE_N = 26

THRESHOLDS = {2: 1.0, 4: 9.93, 8: 176.54, 10: 708.92, 16: 45425.2}


class DimacsError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnsupportedError(ValueError):
    pass


@dataclass(frozen=True)
class Literal:
    var: int
    negated: bool = False

    def dimacs(self) -> int:
        return -(self.var + 1) if self.negated else self.var + 1


@dataclass(frozen=True, eq=False)
class CnfInstance:
    """A CNF formula with ``m`` clauses of ``k`` literals over ``n`` variables.

    ``vars`` and ``neg`` are ``(m, k)`` integer arrays: variable index and
    negation flag (1 = negated) of each literal. ``meta`` carries generation
    details (r, seed) and is not part of equality.
    """

    n: int
    k: int
    vars: np.ndarray
    neg: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vars, dtype=np.int32).reshape(-1, self.k)
        g = np.asarray(self.neg, dtype=np.uint8).reshape(-1, self.k)
        if v.shape != g.shape:
            raise ValueError("vars and neg must have the same shape")
        if v.size and (v.min() < 0 or v.max() >= self.n):
            raise ValueError("variable index out of range")
        v.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "vars", v)
        object.__setattr__(self, "neg", g)

    @classmethod
    def from_clauses(cls, n: int, clauses: Sequence[Sequence[int]], k: Optional[int] = None) -> "CnfInstance":
        """Build from DIMACS-style signed 1-indexed literals."""
        clauses = [list(c) for c in clauses]
        if k is None:
            k = len(clauses[0]) if clauses else 1
        if any(len(c) != k for c in clauses):
            raise ValueError("all clauses must have k literals")
        arr = np.array(clauses, dtype=np.int64).reshape(-1, k)
        if arr.size and (np.any(arr == 0) or np.abs(arr).max() > n):
            raise ValueError("literal out of range")
        return cls(n, k, np.abs(arr) - 1, (arr < 0).astype(np.uint8))

    @property
    def m(self) -> int:
        return self.vars.shape[0]

    def clauses(self) -> list[list[Literal]]:
        return [[Literal(int(v), bool(g)) for v, g in zip(vr, gr)] for vr, gr in zip(self.vars, self.neg)]

    def signed(self) -> np.ndarray:
        return np.where(self.neg == 1, -(self.vars + 1), self.vars + 1)

    def __eq__(self, other):
        if not isinstance(other, CnfInstance):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and np.array_equal(self.vars, other.vars)
            and np.array_equal(self.neg, other.neg)
        )

    def __hash__(self):
        return hash((self.n, self.k, self.vars.tobytes(), self.neg.tobytes()))

    def sidecar(self, satisfiable: Optional[bool] = None) -> str:
        doc = {"n": self.n, "k": self.k, "m": self.m, "r": self.meta.get("r"), "seed": self.meta.get("seed")}
        if satisfiable is not None:
            doc["satisfiable"] = bool(satisfiable)
        return json.dumps(doc)


def sample_instance(n: int, k: int, r: float, rng_seed=None) -> CnfInstance:
    """Draw ``m ~ Poisson(r n)`` clauses of ``k`` literals chosen uniformly with replacement.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator``.
    """
    if n < 1 or k < 1 or r < 0:
        raise ValueError("need n >= 1, k >= 1, r >= 0")
    rng = np.random.default_rng(rng_seed)
    m = int(rng.poisson(r * n))
    lits = rng.integers(0, 2 * n, size=(m, k))
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return CnfInstance(n, k, lits >> 1, (lits & 1).astype(np.uint8), {"r": r, "seed": seed})


def _check_assignment(instance: CnfInstance, assignment) -> np.ndarray:
    bits = np.asarray(assignment, dtype=np.uint8).ravel()
    if bits.size != instance.n:
        raise ValueError(f"assignment has length {bits.size}, expected {instance.n}")
    return bits


def unsat_count(instance: CnfInstance, assignment) -> int:
    """Number of clauses whose literals are all false under ``assignment``."""
    bits = _check_assignment(instance, assignment)
    if instance.m == 0:
        return 0
    lit_true = bits[instance.vars] ^ instance.neg
    return int(np.count_nonzero(~lit_true.any(axis=1)))


def _guard(n: int):
    if n > MAX_BRUTE_FORCE_N:
        raise SizeError(f"n = {n} exceeds the brute-force limit {MAX_BRUTE_FORCE_N}")


def unsat_count_vector(instance: CnfInstance) -> np.ndarray:
    """Unsatisfied-clause count for every assignment; bit i of the index is x_i."""
    _guard(instance.n)
    return kernels.unsat_counts(instance.n, instance.vars, instance.neg)


def count_solutions(instance: CnfInstance) -> int:
    return int(np.count_nonzero(unsat_count_vector(instance) == 0))


def is_satisfiable(instance: CnfInstance) -> bool:
    return count_solutions(instance) > 0


def threshold(k: int) -> float:
    try:
        return THRESHOLDS[int(k)]
    except KeyError:
        raise UnsupportedError(f"no tabulated threshold for k = {k}; pass r explicitly") from None


def bits_from_index(index: int, n: int) -> np.ndarray:
    return (index >> np.arange(n)) & 1


def index_from_bits(bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


# -- DIMACS ------------------------------------------------------------------

def write_dimacs(instance: CnfInstance) -> str:
    # the width is recorded so that clause-free instances keep their k
    lines = [f"c k {instance.k}", f"p cnf {instance.n} {instance.m}"]
    lines += [" ".join(str(int(x)) for x in row) + " 0" for row in instance.signed()]
    return "\n".join(lines) + "\n"


def read_dimacs(text: str, strict_k: Optional[int] = None) -> CnfInstance:
    """Parse DIMACS CNF.

    Clauses may span lines and are terminated by ``0``. Without ``strict_k``
    every clause must have the length of the first clause (instances store a
    single ``k``); with it, any other length is an error.
    """
    header = None
    declared_k = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("c"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == "k" and parts[2].isdigit():
                declared_k = int(parts[2])
            continue
        if not line or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError("malformed header", lineno)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise DimacsError("malformed header", lineno) from None
            if header[0] < 0 or header[1] < 0:
                raise DimacsError("negative header count", lineno)
            continue
        if header is None:
            raise DimacsError("clause before header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                want = strict_k if strict_k is not None else (len(clauses[0]) if clauses else len(current))
                if len(current) != want or not current:
                    raise DimacsError(f"clause of length {len(current)}, expected {want}", lineno)
                clauses.append(current)
                current = []
            elif abs(lit) > header[0]:
                raise DimacsError(f"literal {lit} out of range", lineno)
            else:
                current.append(lit)
    if header is None:
        raise DimacsError("missing header", 0)
    if current:
        raise DimacsError("unterminated clause", len(text.splitlines()))
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, found {len(clauses)}", 0)
    if strict_k is not None:
        k = strict_k
    elif clauses:
        k = len(clauses[0])
    else:
        k = declared_k or 1
    return CnfInstance.from_clauses(header[0], clauses, k)
