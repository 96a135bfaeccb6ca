# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures and results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

BACKEND = "cython"


def unsat_counts(int n, vars_, neg):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    counts_arr = np.zeros(size, dtype=np.int32)
    cdef int[::1] counts = counts_arr
    cdef const int[:, ::1] vv = np.ascontiguousarray(vars_, dtype=np.int32)
    cdef const unsigned char[:, ::1] gg = np.ascontiguousarray(neg, dtype=np.uint8)
    cdef Py_ssize_t m = vv.shape[0], k = vv.shape[1], c, j
    cdef long long mask, val, bit, want, free, sub, full = size - 1
    cdef bint taut
    for c in range(m):
        mask = 0
        val = 0
        taut = False
        for j in range(k):
            bit = (<long long>1) << vv[c, j]
            want = bit if gg[c, j] else 0
            if mask & bit:
                if (val & bit) != want:
                    taut = True
                    break
            else:
                mask |= bit
                val |= want
        if taut:
            continue
        free = full & ~mask
        sub = free
        while True:
            counts[sub | val] += 1
            if sub == 0:
                break
            sub = (sub - 1) & free
    return counts_arr


def apply_mixer(double complex[:, ::1] psi, int n, double beta):
    cdef double complex c = cos(beta / 2)
    cdef double complex s = -1j * sin(beta / 2)
    cdef Py_ssize_t batch = psi.shape[0], size = psi.shape[1], b, i, bit
    cdef int q
    cdef double complex lo, hi
    for b in range(batch):
        for q in range(n):
            bit = (<Py_ssize_t>1) << q
            for i in range(size):
                if i & bit:
                    continue
                lo = psi[b, i]
                hi = psi[b, i | bit]
                psi[b, i] = c * lo + s * hi
                psi[b, i | bit] = s * lo + c * hi


def sum_x(double complex[:, ::1] psi, int n):
    out_arr = np.zeros((psi.shape[0], psi.shape[1]), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t batch = psi.shape[0], size = psi.shape[1], b, i
    cdef int q
    for b in range(batch):
        for i in range(size):
            for q in range(n):
                out[b, i] += psi[b, i ^ ((<Py_ssize_t>1) << q)]
    return out_arr


def zeta_subset(double complex[::1] v, int L):
    cdef Py_ssize_t size = v.shape[0], s, bit
    cdef int i
    for i in range(L):
        bit = (<Py_ssize_t>1) << i
        for s in range(size):
            if s & bit:
                v[s] += v[s ^ bit]


def zeta_superset(double complex[::1] v, int L):
    cdef Py_ssize_t size = v.shape[0], s, bit
    cdef int i
    for i in range(L):
        bit = (<Py_ssize_t>1) << i
        for s in range(size):
            if not (s & bit):
                v[s] += v[s | bit]


def walk(int k, vars_, neg, occ_start, occ_clause, assign, uniforms,
         long steps, int mode, double p_noise, double w1, double w2):
    cdef const int[:, ::1] vv = np.ascontiguousarray(vars_, dtype=np.int32)
    cdef const unsigned char[:, ::1] gg = np.ascontiguousarray(neg, dtype=np.uint8)
    cdef const int[::1] starts = np.ascontiguousarray(occ_start, dtype=np.int32)
    cdef const int[::1] occ = np.ascontiguousarray(occ_clause, dtype=np.int32)
    cdef unsigned char[::1] a = assign
    cdef const double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t m = vv.shape[0]
    numtrue_arr = np.zeros(m, dtype=np.int32)
    unsat_arr = np.empty(max(m, 1), dtype=np.int32)
    where_arr = np.full(max(m, 1), -1, dtype=np.int32)
    delta_arr = np.zeros(max(m, 1), dtype=np.int32)
    touched_arr = np.empty(max(m, 1), dtype=np.int32)
    mark_arr = np.zeros(max(m, 1), dtype=np.uint8)
    cdef int[::1] numtrue = numtrue_arr
    cdef int[::1] unsat = unsat_arr
    cdef int[::1] where = where_arr
    cdef int[::1] delta = delta_arr
    cdef int[::1] touched = touched_arr
    cdef unsigned char[::1] mark = mark_arr
    cdef Py_ssize_t c, j, cc, nu = 0, ntouch, idx
    cdef long t, flips = 0
    cdef int pos, p2, v, cand, tl, brk, mk1, mk2, before, after, best_v
    cdef bint dup, free, best_free
    cdef double lmake, score, best_score
    for c in range(m):
        for j in range(k):
            if a[vv[c, j]] ^ gg[c, j]:
                numtrue[c] += 1
        if numtrue[c] == 0:
            where[c] = nu
            unsat[nu] = c
            nu += 1
    for t in range(steps):
        if nu == 0:
            break
        idx = <Py_ssize_t>(u[3 * t] * nu)
        if idx > nu - 1:
            idx = nu - 1
        c = unsat[idx]
        if mode == 0 or (mode == 1 and u[3 * t + 1] < p_noise):
            pos = <int>(u[3 * t + 2] * k)
            if pos > k - 1:
                pos = k - 1
            v = vv[c, pos]
        else:
            best_v = -1
            best_free = False
            best_score = 0.0
            for pos in range(k):
                cand = vv[c, pos]
                dup = False
                for p2 in range(pos):
                    if vv[c, p2] == cand:
                        dup = True
                        break
                if dup:
                    continue
                tl = 2 * cand + (0 if a[cand] else 1)
                ntouch = 0
                for j in range(starts[tl], starts[tl + 1]):
                    cc = occ[j]
                    if not mark[cc]:
                        mark[cc] = 1
                        touched[ntouch] = cc
                        ntouch += 1
                    delta[cc] -= 1
                for j in range(starts[tl ^ 1], starts[(tl ^ 1) + 1]):
                    cc = occ[j]
                    if not mark[cc]:
                        mark[cc] = 1
                        touched[ntouch] = cc
                        ntouch += 1
                    delta[cc] += 1
                brk = 0
                mk1 = 0
                mk2 = 0
                for j in range(ntouch):
                    cc = touched[j]
                    before = numtrue[cc]
                    after = before + delta[cc]
                    delta[cc] = 0
                    mark[cc] = 0
                    if before > 0 and after == 0:
                        brk += 1
                    elif before == 0 and after > 0:
                        mk1 += 1
                    elif before == 1 and after >= 2:
                        mk2 += 1
                lmake = w1 * mk1 + w2 * mk2
                free = brk == 0
                score = lmake if free else lmake - brk * (w1 + w2)
                if best_v < 0 or (free and not best_free) or (free == best_free and score > best_score):
                    best_v = cand
                    best_free = free
                    best_score = score
            v = best_v
            if mode == 2 and not best_free and u[3 * t + 1] < p_noise:
                pos = <int>(u[3 * t + 2] * k)
                if pos > k - 1:
                    pos = k - 1
                v = vv[c, pos]
        tl = 2 * v + (0 if a[v] else 1)
        a[v] ^= 1
        for j in range(starts[tl], starts[tl + 1]):
            cc = occ[j]
            numtrue[cc] -= 1
            if numtrue[cc] == 0:
                where[cc] = nu
                unsat[nu] = cc
                nu += 1
        for j in range(starts[tl ^ 1], starts[(tl ^ 1) + 1]):
            cc = occ[j]
            if numtrue[cc] == 0:
                idx = where[cc]
                nu -= 1
                if unsat[nu] != cc:
                    unsat[idx] = unsat[nu]
                    where[unsat[nu]] = idx
                where[cc] = -1
            numtrue[cc] += 1
        flips += 1
    return nu == 0, flips
