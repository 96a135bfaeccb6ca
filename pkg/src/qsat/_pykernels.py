"""Reference implementations of the hot kernels in numpy / pure Python.

These define the semantics; the compiled ``_ckernels`` module must agree with
them exactly (bit-for-bit for the integer kernels and the walks).
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def unsat_counts(n: int, vars_: np.ndarray, neg: np.ndarray) -> np.ndarray:
    """Unsatisfied-clause count for every assignment index in ``[0, 2**n)``.

    A clause fixing ``d`` distinct variables is violated on a subcube of
    ``2**(n-d)`` assignments; tautological clauses are never violated.
    """
    size = 1 << n
    counts = np.zeros(size, dtype=np.int32)
    if len(vars_) == 0:
        return counts
    y = np.arange(size, dtype=np.int64)
    masks: dict[tuple[int, int], int] = {}
    for vr, gr in zip(vars_.tolist(), neg.tolist()):
        mask = val = 0
        taut = False
        for v, g in zip(vr, gr):
            bit = 1 << v
            want = bit if g else 0  # all literals false: negated literal needs x_v = 1
            if mask & bit:
                if (val & bit) != want:
                    taut = True
                    break
            else:
                mask |= bit
                val |= want
        if not taut:
            masks[(mask, val)] = masks.get((mask, val), 0) + 1
    for (mask, val), mult in masks.items():
        counts[(y & mask) == val] += mult
    return counts


def apply_mixer(psi: np.ndarray, n: int, beta: float) -> None:
    """In place: apply ``exp(-i beta/2 X)`` to every qubit of each row of ``psi``."""
    c, s = np.cos(beta / 2), -1j * np.sin(beta / 2)
    batch = psi.shape[0]
    for q in range(n):
        view = psi.reshape(batch, -1, 2, 1 << q)
        lo = view[:, :, 0, :].copy()
        hi = view[:, :, 1, :]
        view[:, :, 0, :] = c * lo + s * hi
        view[:, :, 1, :] = s * lo + c * hi


def sum_x(psi: np.ndarray, n: int) -> np.ndarray:
    """Return ``(sum_q X_q) psi`` for each row of ``psi``."""
    out = np.zeros_like(psi)
    batch = psi.shape[0]
    for q in range(n):
        view = psi.reshape(batch, -1, 2, 1 << q)
        acc = out.reshape(batch, -1, 2, 1 << q)
        acc[:, :, 0, :] += view[:, :, 1, :]
        acc[:, :, 1, :] += view[:, :, 0, :]
    return out


def zeta_subset(v: np.ndarray, L: int) -> None:
    """In place: ``v[S] <- sum_{T subset of S} v[T]``."""
    for i in range(L):
        view = v.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]


def zeta_superset(v: np.ndarray, L: int) -> None:
    """In place: ``v[S] <- sum_{T superset of S} v[T]``."""
    for i in range(L):
        view = v.reshape(-1, 2, 1 << i)
        view[:, 0, :] += view[:, 1, :]


def walk(
    k: int,
    vars_: np.ndarray,
    neg: np.ndarray,
    occ_start: np.ndarray,
    occ_clause: np.ndarray,
    assign: np.ndarray,
    uniforms: np.ndarray,
    steps: int,
    mode: int,
    p_noise: float,
    w1: float,
    w2: float,
) -> tuple[bool, int]:
    """One local-search walk of at most ``steps`` flips from ``assign`` (modified in place).

    ``mode`` 0 is WalkSAT (random literal of a random unsatisfied clause);
    mode 1 is WalkSATlm with the noise test first, mode 2 WalkSATlm with
    zero-break variables taken before the noise test. Step ``t`` consumes ``uniforms[3t:3t+3]``:
    clause choice, noise test, literal choice. Returns ``(solved, flips)``.
    Occurrence lists are indexed by literal ``2*var + negated``.
    """
    m = vars_.shape[0]
    vl = vars_.tolist()
    gl = neg.tolist()
    a = assign.tolist()
    starts = occ_start.tolist()
    occ = occ_clause.tolist()
    numtrue = [0] * m
    for c in range(m):
        numtrue[c] = sum(1 for v, g in zip(vl[c], gl[c]) if a[v] ^ g)
    unsat = [c for c in range(m) if numtrue[c] == 0]
    where = [-1] * m
    for i, c in enumerate(unsat):
        where[c] = i
    delta = [0] * m

    def scores(v):
        # true literal of v loses, false literal of v gains one per occurrence
        tl = 2 * v + (0 if a[v] else 1)
        fl = tl ^ 1
        touched = []
        for j in range(starts[tl], starts[tl + 1]):
            c = occ[j]
            if delta[c] == 0:
                touched.append(c)
            delta[c] -= 1
        for j in range(starts[fl], starts[fl + 1]):
            c = occ[j]
            if delta[c] == 0 and c not in touched:
                touched.append(c)
            delta[c] += 1
        brk = mk1 = mk2 = 0
        for c in touched:
            before = numtrue[c]
            after = before + delta[c]
            delta[c] = 0
            if before > 0 and after == 0:
                brk += 1
            elif before == 0 and after > 0:
                mk1 += 1
            elif before == 1 and after >= 2:
                mk2 += 1
        return brk, w1 * mk1 + w2 * mk2

    flips = 0
    for t in range(steps):
        if not unsat:
            break
        u0, u1, u2 = uniforms[3 * t], uniforms[3 * t + 1], uniforms[3 * t + 2]
        nu = len(unsat)
        c = unsat[min(int(u0 * nu), nu - 1)]
        if mode == 0 or (mode == 1 and u1 < p_noise):
            v = vl[c][min(int(u2 * k), k - 1)]
        else:
            best_v = -1
            best_free = False
            best_score = 0.0
            for pos in range(k):
                cand = vl[c][pos]
                if cand in vl[c][:pos]:
                    continue
                brk, lmake = scores(cand)
                free = brk == 0
                score = lmake if free else lmake - brk * (w1 + w2)
                if best_v < 0 or (free and not best_free) or (free == best_free and score > best_score):
                    best_v, best_free, best_score = cand, free, score
            v = best_v
            if mode == 2 and not best_free and u1 < p_noise:
                v = vl[c][min(int(u2 * k), k - 1)]
        tl = 2 * v + (0 if a[v] else 1)
        a[v] ^= 1
        for j in range(starts[tl], starts[tl + 1]):
            cc = occ[j]
            numtrue[cc] -= 1
            if numtrue[cc] == 0:
                where[cc] = len(unsat)
                unsat.append(cc)
        for j in range(starts[tl ^ 1], starts[(tl ^ 1) + 1]):
            cc = occ[j]
            if numtrue[cc] == 0:
                i = where[cc]
                last = unsat.pop()
                if last != cc:
                    unsat[i] = last
                    where[last] = i
                where[cc] = -1
            numtrue[cc] += 1
        flips += 1
    assign[:] = a
    return (not unsat), flips
