# cython: language_level=3
"""Compiled inner loops. Each function mirrors one in ``ifit._fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt
from libcpp.vector cimport vector

cnp.import_array()


cdef inline bint _less(double da, Py_ssize_t ia, double db, Py_ssize_t ib) nogil:
    return da < db or (da == db and ia < ib)


cdef inline void _heap_replace_top(double* hd, Py_ssize_t* hi, Py_ssize_t k,
                                   double d, Py_ssize_t idx) nogil:
    """Replace the max of a (distance, index) max-heap and sift down."""
    cdef Py_ssize_t pos = 0, child
    while True:
        child = 2 * pos + 1
        if child >= k:
            break
        if child + 1 < k and _less(hd[child], hi[child], hd[child + 1], hi[child + 1]):
            child += 1
        if _less(d, idx, hd[child], hi[child]):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hd[pos] = d
    hi[pos] = idx


cdef inline void _heap_push(double* hd, Py_ssize_t* hi, Py_ssize_t n,
                            double d, Py_ssize_t idx) nogil:
    cdef Py_ssize_t pos = n, parent
    while pos > 0:
        parent = (pos - 1) // 2
        if _less(hd[parent], hi[parent], d, idx):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = idx


def knn_tricube(const double[:, ::1] x, const double[:, ::1] t, Py_ssize_t k):
    """Tricube-weighted k-NN mean of ``t`` at every row of ``x`` (Euclidean in ``x``).

    Neighbors are the k smallest (distance, index) pairs, found by sweeping
    outward along the first coordinate with a bounded max-heap.
    """
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], q = t.shape[1]
    cdef Py_ssize_t i, r, j, m, pos, lo, hi, size
    cdef double s, diff, dbar2, ratio, w, wsum, dx
    cdef bint go_lo, go_hi
    if k > n:
        k = n
    out_arr = np.zeros((n, q))
    cdef double[:, ::1] out = out_arr
    order_arr = np.argsort(np.asarray(x[:, 0]), kind="stable")
    cdef Py_ssize_t[::1] order = order_arr.astype(np.intp)
    rank_arr = np.empty(n, dtype=np.intp)
    rank_arr[order_arr] = np.arange(n)
    cdef Py_ssize_t[::1] rank = rank_arr
    xs_arr = np.ascontiguousarray(np.asarray(x)[order_arr])
    cdef double[:, ::1] xs = xs_arr
    cdef vector[double] hd
    cdef vector[Py_ssize_t] hidx
    hd.resize(k)
    hidx.resize(k)
    for i in range(n):
        pos = rank[i]
        size = 0
        lo = pos
        hi = pos + 1
        go_lo = True
        go_hi = True
        while go_lo or go_hi:
            if go_lo:
                if lo < 0:
                    go_lo = False
                else:
                    dx = xs[lo, 0] - xs[pos, 0]
                    if size == k and dx * dx > hd[0]:
                        go_lo = False
                    else:
                        s = dx * dx
                        for j in range(1, p):
                            diff = xs[lo, j] - xs[pos, j]
                            s += diff * diff
                        r = order[lo]
                        if size < k:
                            _heap_push(&hd[0], &hidx[0], size, s, r)
                            size += 1
                        elif _less(s, r, hd[0], hidx[0]):
                            _heap_replace_top(&hd[0], &hidx[0], k, s, r)
                        lo -= 1
            if go_hi:
                if hi >= n:
                    go_hi = False
                else:
                    dx = xs[hi, 0] - xs[pos, 0]
                    if size == k and dx * dx > hd[0]:
                        go_hi = False
                    else:
                        s = dx * dx
                        for j in range(1, p):
                            diff = xs[hi, j] - xs[pos, j]
                            s += diff * diff
                        r = order[hi]
                        if size < k:
                            _heap_push(&hd[0], &hidx[0], size, s, r)
                            size += 1
                        elif _less(s, r, hd[0], hidx[0]):
                            _heap_replace_top(&hd[0], &hidx[0], k, s, r)
                        hi += 1
        dbar2 = hd[0]
        wsum = 0.0
        for m in range(k):
            r = hidx[m]
            if dbar2 > 0.0:
                if hd[m] >= dbar2:
                    continue
                ratio = sqrt(hd[m] / dbar2)
                w = 1.0 - ratio * ratio * ratio
                w = w * w * w
            else:
                w = 1.0
            wsum += w
            for j in range(q):
                out[i, j] += w * t[r, j]
        for j in range(q):
            out[i, j] /= wsum
    return out_arr


def gillespie_mm(double th1, double th2, double th3, long e0, long s0, long c0, long p0,
                 const double[::1] grid, const double[::1] uniforms):
    """Exact SSA for E+S->C, C->E+S, C->E+P. Returns ``(states, used)``; ``used=-1`` if
    ``uniforms`` ran out."""
    cdef Py_ssize_t m = grid.shape[0], nu = uniforms.shape[0]
    out_arr = np.empty((4, m), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef long e = e0, s = s0, c = c0, pr = p0
    cdef double t = 0.0, a1, a2, a3, a0, tnew, rr
    cdef Py_ssize_t j = 0, used = 0
    while j < m:
        a1 = th1 * e * s
        a2 = th2 * c
        a3 = th3 * c
        a0 = a1 + a2 + a3
        if a0 <= 0.0:
            while j < m:
                out[0, j] = e; out[1, j] = s; out[2, j] = c; out[3, j] = pr
                j += 1
            break
        if used >= nu:
            return out_arr, -1
        tnew = t - log(1.0 - uniforms[used]) / a0
        used += 1
        while j < m and grid[j] < tnew:
            out[0, j] = e; out[1, j] = s; out[2, j] = c; out[3, j] = pr
            j += 1
        if j >= m:
            break
        if used >= nu:
            return out_arr, -1
        rr = uniforms[used] * a0
        used += 1
        if rr < a1:
            e -= 1; s -= 1; c += 1
        elif rr < a1 + a2:
            e += 1; s += 1; c -= 1
        else:
            e += 1; c -= 1; pr += 1
        t = tnew
    return out_arr, used


cdef inline void _fen_add(long long[::1] tree, Py_ssize_t i, long long v) nogil:
    cdef Py_ssize_t n = tree.shape[0] - 1
    i += 1
    while i <= n:
        tree[i] += v
        i += i & (-i)


cdef inline Py_ssize_t _fen_find(long long[::1] tree, long long target, Py_ssize_t logn) nogil:
    """Smallest index whose prefix sum exceeds ``target``."""
    cdef Py_ssize_t n = tree.shape[0] - 1, pos = 0, step = logn, nxt
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return pos


def trait_dynamics(long long[::1] traits, const long long[::1] weights,
                   const long long[::1] imm_cdf, double gamma, const double[:, ::1] u):
    """Death/replacement steps on integer fitness ``weights``. Updates ``traits`` in place
    and returns species counts."""
    cdef Py_ssize_t npop = traits.shape[0], nt = weights.shape[0], steps = u.shape[0]
    cdef Py_ssize_t i, s, idx, newt, lo, hi, mid, logn = 1
    cdef long long total, target
    counts_arr = np.zeros(nt, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    tree_arr = np.zeros(nt + 1, dtype=np.int64)
    cdef long long[::1] tree = tree_arr
    while logn * 2 <= nt:
        logn *= 2
    total = 0
    for i in range(npop):
        counts[traits[i]] += 1
        _fen_add(tree, traits[i], weights[traits[i]])
        total += weights[traits[i]]
    for s in range(steps):
        idx = <Py_ssize_t>(u[s, 0] * npop)
        if idx >= npop:
            idx = npop - 1
        counts[traits[idx]] -= 1
        _fen_add(tree, traits[idx], -weights[traits[idx]])
        total -= weights[traits[idx]]
        if u[s, 1] < gamma or total <= 0:
            target = <long long>(u[s, 2] * imm_cdf[nt - 1])
            lo = 0
            hi = nt - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if imm_cdf[mid] > target:
                    hi = mid
                else:
                    lo = mid + 1
            newt = lo
        else:
            target = <long long>(u[s, 2] * total)
            newt = _fen_find(tree, target, logn)
        traits[idx] = newt
        counts[newt] += 1
        _fen_add(tree, newt, weights[newt])
        total += weights[newt]
    return counts_arr


def toad_paths(const double[:, ::1] deltas, const double[:, ::1] coin,
               const double[:, ::1] pick, double prob_return):
    """Refuge positions, shape ``(n_days, n_toads)``; day 0 is the origin."""
    cdef Py_ssize_t nd = deltas.shape[0] + 1, nt = deltas.shape[1]
    cdef Py_ssize_t d, a, back
    out_arr = np.zeros((nd, nt))
    cdef double[:, ::1] out = out_arr
    for a in range(nt):
        for d in range(1, nd):
            if coin[d - 1, a] < prob_return:
                back = <Py_ssize_t>(pick[d - 1, a] * d)
                if back >= d:
                    back = d - 1
                out[d, a] = out[back, a]
            else:
                out[d, a] = out[d - 1, a] + deltas[d - 1, a]
    return out_arr
