"""Pure Python / numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable (or ``AFCS_PURE_PYTHON=1``).
"""
from collections import deque
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

# Group sums below this are recomputed with their own max shift.
TINY = 1e-250
# Rows are processed in blocks holding at most this many configurations.
BLOCK_CONFIGS = 1 << 22


def peel(indptr, indices, weights, colptr, rowidx, edge, residual, n, T, eps, order):
    """Run sum-verification peeling to its fixed point.

    ``residual`` is updated in place.  Returns ``(values, steps, ambiguous_row)``
    where ``values`` holds -1 for unresolved variables and ``ambiguous_row`` is
    -1 unless a row matched two distinct subsets.
    """
    indptr = indptr.tolist()
    indices = indices.tolist()
    weights = weights.tolist()
    colptr = colptr.tolist()
    rowidx = rowidx.tolist()
    edge = edge.tolist()
    res = residual.tolist()
    m = len(indptr) - 1
    values = [-1] * n
    unresolved = [indptr[i + 1] - indptr[i] for i in range(m)]
    queued = [False] * m
    queue = deque()
    for i in order.tolist():
        if not queued[i]:
            queued[i] = True
            queue.append(i)
    steps = 0
    while queue:
        i = queue.popleft()
        queued[i] = False
        if unresolved[i] == 0:
            continue
        nbr = [(indices[e], weights[e]) for e in range(indptr[i], indptr[i + 1])
               if values[indices[e]] < 0]
        u = len(nbr)
        r = res[i]
        match = None
        for t in range(min(T, u) + 1):
            for sub in combinations(range(u), t):
                s = 0.0
                for p in sub:
                    s += nbr[p][1]
                if abs(r - s) <= eps:
                    if match is not None:
                        residual[:] = res
                        return np.array(values, dtype=np.int8), steps, i
                    match = sub
        if match is None:
            continue
        steps += 1
        ones = set(match)
        for p, (j, _) in enumerate(nbr):
            val = 1 if p in ones else 0
            values[j] = val
            for q in range(colptr[j], colptr[j + 1]):
                row = rowidx[q]
                if val:
                    res[row] -= weights[edge[q]]
                unresolved[row] -= 1
                if not queued[row] and unresolved[row] > 0:
                    queued[row] = True
                    queue.append(row)
    residual[:] = res
    return np.array(values, dtype=np.int8), steps, -1


def _config_bits(L):
    c = np.arange(1 << L, dtype=np.int64)
    return ((c[:, None] >> np.arange(L)) & 1).astype(np.float64)


def _exact_groups(A, L):
    """Per-bit log-sum-exp of each row of ``A`` over configurations with bit j equal to r."""
    out = np.empty((A.shape[0], L, 2))
    for j in range(L):
        v = A.reshape(A.shape[0], 1 << (L - 1 - j), 2, 1 << j)
        out[:, j] = logsumexp(v, axis=(1, 3))
    return out


def bp_check_update(indptr, weights, y, sigma, logq0, logq1, logm0, logm1):
    """Check-to-variable messages by exact enumeration of neighbor configurations.

    For edge (i, j) and r in {0, 1}, the message is proportional to the sum over
    configurations of the other neighbors of their incoming-message product
    times the Gaussian likelihood of ``y[i]``.  Writes normalized
    log-messages into ``logm0`` / ``logm1``.
    """
    deg = np.diff(indptr)
    inv2var = 1.0 / (2.0 * sigma * sigma)
    for L in np.unique(deg):
        L = int(L)
        rows = np.flatnonzero(deg == L)
        if L == 0:
            continue
        bits = _config_bits(L)
        nbits = 1.0 - bits
        per_block = max(1, BLOCK_CONFIGS >> L)
        for start in range(0, rows.size, per_block):
            blk = rows[start:start + per_block]
            e = indptr[blk][:, None] + np.arange(L)
            W = weights[e]
            q0, q1 = logq0[e], logq1[e]
            diff = y[blk][:, None] - W @ bits.T
            A = -diff * diff * inv2var + q1 @ bits.T + q0 @ nbits.T
            M = A.max(axis=1)
            E = np.exp(A - M[:, None])
            G = np.stack([E @ nbits, E @ bits], axis=-1)
            with np.errstate(divide="ignore"):
                lg = np.log(G) + M[:, None, None]
            bad = np.flatnonzero((G < TINY).any(axis=(1, 2)))
            if bad.size:
                lg[bad] = _exact_groups(A[bad], L)
            lm = lg - np.stack([q0, q1], axis=-1)
            norm = np.logaddexp(lm[..., 0], lm[..., 1])
            logm0[e] = lm[..., 0] - norm
            logm1[e] = lm[..., 1] - norm
