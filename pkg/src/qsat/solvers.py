"""Stochastic local search for k-SAT: WalkSAT, WalkSATlm and a WalkSAT+QAOA hybrid.

Cost is counted in formula evaluations: one per flip and one per restart
(initial assignment).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .qaoa import QaoaAngles
from .sat import CnfInstance, unsat_count
from .simulator import run_qaoa, success_probability

__all__ = [
    "SolveResult",
    "WalksatLmParams",
    "HybridResult",
    "walksat",
    "walksatlm",
    "walk_from",
    "walksat_qaoa_hybrid",
    "qaoa_runtime",
]


@dataclass
class SolveResult:
    found: Optional[np.ndarray]
    flips: int
    evaluations: int
    tries: int
    success: bool

    def record(self, solver: str, instance: CnfInstance, seed) -> dict:
        return {
            "solver": solver,
            "n": instance.n,
            "k": instance.k,
            "r": instance.meta.get("r"),
            "seed": seed,
            "success": self.success,
            "flips": self.flips,
            "evaluations": self.evaluations,
            "tries": self.tries,
        }


@dataclass(frozen=True)
class WalksatLmParams:
    """Noise probability and make-count weights of WalkSATlm."""

    p_noise: float = 0.15
    w1: float = 6.0
    w2: float = 5.0
    variant: str = "noise_first"

    def __post_init__(self):
        if not 0 <= self.p_noise <= 1:
            raise ValueError("p_noise must lie in [0, 1]")
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {sorted(_VARIANTS)}")

    @property
    def mode(self) -> int:
        return _VARIANTS[self.variant]


# noise_first: random step with probability p_noise, else greedy (zero-break first).
# freebie_first: a zero-break variable is always taken; the noise test applies otherwise.
_VARIANTS = {"noise_first": 1, "freebie_first": 2}


class _Occurrences:
    """Clause occurrence lists indexed by literal ``2*var + negated``."""

    def __init__(self, instance: CnfInstance):
        lit = (2 * instance.vars + instance.neg).ravel()
        clause = np.repeat(np.arange(instance.m, dtype=np.int32), instance.k)
        order = np.argsort(lit, kind="stable")
        self.clause = np.ascontiguousarray(clause[order], dtype=np.int32)
        counts = np.bincount(lit, minlength=2 * instance.n)
        self.start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)


def walk_from(
    instance: CnfInstance,
    assignment,
    uniforms: np.ndarray,
    steps: int,
    params: Optional[WalksatLmParams] = None,
    occurrences: Optional[_Occurrences] = None,
) -> tuple[bool, int, np.ndarray]:
    """Run one walk of at most ``steps`` flips from ``assignment``.

    ``params=None`` selects the WalkSAT rule. ``uniforms`` must hold at least
    ``3 * steps`` numbers in [0, 1). Returns ``(solved, flips, final_assignment)``.
    """
    occ = occurrences or _Occurrences(instance)
    assign = np.array(assignment, dtype=np.uint8).ravel()
    if uniforms.size < 3 * steps:
        raise ValueError("not enough uniforms for the requested steps")
    mode = 0 if params is None else params.mode
    p = params or WalksatLmParams(1.0, 0.0, 0.0)
    solved, flips = kernels.walk(
        instance.k, instance.vars, instance.neg, occ.start, occ.clause,
        assign, uniforms, steps, mode, p.p_noise, p.w1, p.w2,
    )
    return bool(solved), int(flips), assign


def _local_search(instance, rng_seed, steps_per_try, max_tries, params) -> SolveResult:
    n = instance.n
    steps = 3 * n if steps_per_try is None else int(steps_per_try)
    if steps < 1:
        raise ValueError("steps_per_try must be >= 1")
    if max_tries < 1:
        raise ValueError("max_tries must be >= 1")
    rng = np.random.default_rng(rng_seed)
    occ = _Occurrences(instance)
    flips = 0
    for t in range(1, max_tries + 1):
        u = rng.random(n + 3 * steps)
        start = (u[:n] < 0.5).astype(np.uint8)
        solved, f, final = walk_from(instance, start, u[n:], steps, params, occ)
        flips += f
        if solved:
            return SolveResult(final, flips, flips + t, t, True)
    return SolveResult(None, flips, flips + max_tries, max_tries, False)


def walksat(instance: CnfInstance, rng_seed=None, steps_per_try: Optional[int] = None, max_tries: int = 1000) -> SolveResult:
    """WalkSAT: flip a random variable of a random unsatisfied clause.

    Each try restarts from a uniformly random assignment and performs at most
    ``steps_per_try`` (default ``3n``) flips.
    """
    return _local_search(instance, rng_seed, steps_per_try, max_tries, None)


def walksatlm(
    instance: CnfInstance,
    rng_seed=None,
    params: WalksatLmParams = WalksatLmParams(),
    steps_per_try: Optional[int] = None,
    max_tries: int = 1000,
) -> SolveResult:
    """WalkSATlm: random-walk step with probability ``p_noise``, else greedy on (break, lmake).

    The greedy choice within the picked unsatisfied clause prefers variables
    with zero break count (highest lmake first), and otherwise maximizes
    ``lmake - break * (w1 + w2)``, with ``lmake = w1 * make1 + w2 * make2``.
    """
    return _local_search(instance, rng_seed, steps_per_try, max_tries, params)


@dataclass
class HybridResult:
    round_success: float
    rounds: int
    successes: int
    solve: SolveResult
    sampled_hits: int = 0

    @property
    def runtime(self) -> float:
        return math.inf if self.round_success == 0 else 1.0 / self.round_success


def walksat_qaoa_hybrid(
    instance: CnfInstance,
    angles: QaoaAngles,
    rng_seed=None,
    steps_per_try: Optional[int] = None,
    rounds: int = 100,
) -> HybridResult:
    """Sample a start from the QAOA output distribution, then run one WalkSAT walk.

    Runs ``rounds`` independent rounds and reports the fraction that reached a
    satisfying assignment (whose inverse is the hybrid's expected number of
    rounds). ``solve`` describes the rounds up to and including the first
    success. ``sampled_hits`` counts rounds whose sample already satisfied the
    instance.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    n = instance.n
    steps = 3 * n if steps_per_try is None else int(steps_per_try)
    probs = run_qaoa(instance, angles).probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(rng_seed)
    occ = _Occurrences(instance)
    samples = rng.choice(probs.size, size=rounds, p=probs)
    successes = hits = 0
    first: Optional[SolveResult] = None
    flips = 0
    for i, index in enumerate(samples, start=1):
        start = ((int(index) >> np.arange(n)) & 1).astype(np.uint8)
        if unsat_count(instance, start) == 0:
            hits += 1
        solved, f, final = walk_from(instance, start, rng.random(3 * steps), steps, None, occ)
        flips += f
        if solved:
            successes += 1
            if first is None:
                first = SolveResult(final, flips, flips + i, i, True)
    if first is None:
        first = SolveResult(None, flips, flips + rounds, rounds, False)
    return HybridResult(successes / rounds, rounds, successes, first, hits)


def qaoa_runtime(instance: CnfInstance, angles: QaoaAngles) -> float:
    """``1 / success_probability``; ``math.inf`` when the probability is zero."""
    p = success_probability(instance, angles)
    return math.inf if p <= 0 else 1.0 / p
