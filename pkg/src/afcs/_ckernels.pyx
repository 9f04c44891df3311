# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sum-verification peeling and exact BP check updates.

Semantics match ``afcs._pykernels`` bit for bit in the peeling kernel and to
rounding in the BP kernel.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double TINY = 1e-250
# exp() of anything below this is zero in double precision
cdef double UNDERFLOW = -745.2


cdef inline bint _next_comb(int* c, int t, int u):
    """Advance combination c[0..t) of range(u) lexicographically; False when exhausted."""
    cdef int k = t - 1
    while k >= 0 and c[k] == u - t + k:
        k -= 1
    if k < 0:
        return False
    c[k] += 1
    k += 1
    while k < t:
        c[k] = c[k - 1] + 1
        k += 1
    return True


def peel(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
         const double[::1] weights, const cnp.int64_t[::1] colptr,
         const cnp.int64_t[::1] rowidx, const cnp.int64_t[::1] edge,
         double[::1] residual, Py_ssize_t n, int T, double eps,
         const cnp.int64_t[::1] order):
    cdef Py_ssize_t m = indptr.shape[0] - 1
    cdef Py_ssize_t i, e, q, row, j, head = 0, tail = 0, qcap = m + 1
    cdef int u, t, p, tmax, maxdeg = 0, nmatch
    cdef long steps = 0
    cdef double s, r

    values_arr = np.full(n, -1, dtype=np.int8)
    cdef cnp.int8_t[::1] values = values_arr
    unresolved_arr = np.diff(np.asarray(indptr)).astype(np.int64)
    cdef cnp.int64_t[::1] unresolved = unresolved_arr
    queued_arr = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] queued = queued_arr
    queue_arr = np.empty(qcap, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr

    for i in range(m):
        if indptr[i + 1] - indptr[i] > maxdeg:
            maxdeg = <int>(indptr[i + 1] - indptr[i])
    cdef Py_ssize_t* nb_var = <Py_ssize_t*>malloc((maxdeg + 1) * sizeof(Py_ssize_t))
    cdef double* nb_w = <double*>malloc((maxdeg + 1) * sizeof(double))
    cdef int* comb = <int*>malloc((maxdeg + 1) * sizeof(int))
    cdef int* best = <int*>malloc((maxdeg + 1) * sizeof(int))
    cdef int best_t
    cdef Py_ssize_t amb = -1
    try:
        for e in range(order.shape[0]):
            i = order[e]
            if not queued[i]:
                queued[i] = 1
                queue[tail] = i
                tail = (tail + 1) % qcap
        while head != tail:
            i = queue[head]
            head = (head + 1) % qcap
            queued[i] = 0
            if unresolved[i] == 0:
                continue
            u = 0
            for e in range(indptr[i], indptr[i + 1]):
                if values[indices[e]] < 0:
                    nb_var[u] = indices[e]
                    nb_w[u] = weights[e]
                    u += 1
            r = residual[i]
            nmatch = 0
            best_t = -1
            tmax = T if T < u else u
            for t in range(tmax + 1):
                for p in range(t):
                    comb[p] = p
                while True:
                    s = 0.0
                    for p in range(t):
                        s += nb_w[comb[p]]
                    if fabs(r - s) <= eps:
                        nmatch += 1
                        if nmatch == 1:
                            best_t = t
                            for p in range(t):
                                best[p] = comb[p]
                    if nmatch > 1 or not _next_comb(comb, t, u):
                        break
                if nmatch > 1:
                    break
            if nmatch > 1:
                amb = i
                break
            if nmatch == 0:
                continue
            steps += 1
            # best[] is sorted; walk it alongside the neighbor list
            t = 0
            for p in range(u):
                j = nb_var[p]
                if t < best_t and best[t] == p:
                    values[j] = 1
                    t += 1
                else:
                    values[j] = 0
                for q in range(colptr[j], colptr[j + 1]):
                    row = rowidx[q]
                    if values[j] == 1:
                        residual[row] -= weights[edge[q]]
                    unresolved[row] -= 1
                    if not queued[row] and unresolved[row] > 0:
                        queued[row] = 1
                        queue[tail] = row
                        tail = (tail + 1) % qcap
    finally:
        free(nb_var)
        free(nb_w)
        free(comb)
        free(best)
    return values_arr, steps, amb


cdef inline int _ctz(Py_ssize_t c):
    cdef int k = 0
    while not (c & 1):
        c >>= 1
        k += 1
    return k


def bp_check_update(const cnp.int64_t[::1] indptr, const double[::1] weights,
                    const double[::1] y, double sigma,
                    const double[::1] logq0, const double[::1] logq1,
                    double[::1] logm0, double[::1] logm1):
    cdef Py_ssize_t m = indptr.shape[0] - 1
    cdef Py_ssize_t i, c, nc, low, e0, half
    cdef int L, j, b, maxdeg = 0
    cdef double inv2var = 1.0 / (2.0 * sigma * sigma)
    cdef double M, v, d, g0, g1, l0, l1, mx, norm, base

    for i in range(m):
        if indptr[i + 1] - indptr[i] > maxdeg:
            maxdeg = <int>(indptr[i + 1] - indptr[i])
    if maxdeg == 0:
        return
    cdef Py_ssize_t cap = (<Py_ssize_t>1) << maxdeg
    cdef double* S = <double*>malloc(cap * sizeof(double))
    cdef double* A = <double*>malloc(cap * sizeof(double))
    cdef double* G = <double*>malloc(2 * maxdeg * sizeof(double))
    cdef double* lg = <double*>malloc(2 * maxdeg * sizeof(double))
    try:
        for i in range(m):
            e0 = indptr[i]
            L = <int>(indptr[i + 1] - e0)
            if L == 0:
                continue
            nc = (<Py_ssize_t>1) << L
            base = 0.0
            for j in range(L):
                base += logq0[e0 + j]
            # subset DP: config c extends c without its lowest bit
            S[0] = 0.0
            A[0] = base
            for c in range(1, nc):
                j = _ctz(c)
                low = c & (c - 1)
                S[c] = S[low] + weights[e0 + j]
                A[c] = A[low] + logq1[e0 + j] - logq0[e0 + j]
            M = -INFINITY
            for c in range(nc):
                d = y[i] - S[c]
                A[c] = A[c] - d * d * inv2var
                if A[c] > M:
                    M = A[c]
            for c in range(nc):
                v = A[c] - M
                S[c] = exp(v) if v > UNDERFLOW else 0.0
            # fold halves: the top bit of the current block splits its sum
            half = nc >> 1
            j = L - 1
            while half > 0:
                g0 = 0.0
                g1 = 0.0
                for c in range(half):
                    g0 += S[c]
                    g1 += S[c + half]
                    S[c] += S[c + half]
                G[2 * j] = g0
                G[2 * j + 1] = g1
                half >>= 1
                j -= 1
            for j in range(L):
                for b in range(2):
                    if G[2 * j + b] >= TINY:
                        lg[2 * j + b] = log(G[2 * j + b]) + M
                    else:
                        mx = -INFINITY
                        for c in range(nc):
                            if ((c >> j) & 1) == b and A[c] > mx:
                                mx = A[c]
                        v = 0.0
                        for c in range(nc):
                            if ((c >> j) & 1) == b and A[c] - mx > UNDERFLOW:
                                v += exp(A[c] - mx)
                        lg[2 * j + b] = log(v) + mx
            for j in range(L):
                l0 = lg[2 * j] - logq0[e0 + j]
                l1 = lg[2 * j + 1] - logq1[e0 + j]
                mx = l0 if l0 > l1 else l1
                norm = mx + log(exp(l0 - mx) + exp(l1 - mx))
                logm0[e0 + j] = l0 - norm
                logm1[e0 + j] = l1 - norm
    finally:
        free(S)
        free(A)
        free(G)
        free(lg)
