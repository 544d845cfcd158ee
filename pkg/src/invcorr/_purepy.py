"""Pure-Python implementations of the hot kernels.

These mirror ``_speedups.pyx`` operation for operation, so that both backends
visit the same pivots and produce the same tables.  They are used when the
compiled extension is unavailable or ``INVCORR_PURE_PYTHON=1`` is set.
"""

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def rgs_table(d, count):
    """Return the ``count`` x ``d`` table of restricted growth strings.

    Rows are in lexicographic order; row ``k`` holds the 0-based block label
    of each element in the ``k``-th set partition of ``{1..d}``.
    """
    out = np.zeros((count, d), dtype=np.int8)
    a = [0] * d
    prefix_max = [0] * d
    for row in range(count):
        out[row] = a
        # rightmost position that can still grow
        i = d - 1
        while i > 0 and a[i] > prefix_max[i - 1]:
            i -= 1
        if i == 0:
            break
        a[i] += 1
        prefix_max[i] = max(prefix_max[i - 1], a[i])
        for j in range(i + 1, d):
            a[j] = 0
            prefix_max[j] = prefix_max[i]
    return out


def pivot(T, p, q):
    T[p] /= T[p, q]
    factors = T[:, q].copy()
    factors[p] = 0
    T -= np.outer(factors, T[p])


def pivot_loop(T, basis, allowed, eps, max_iter):
    """Run Bland-rule primal simplex iterations on a dense tableau in place.

    ``T`` has the constraint rows first and the reduced-cost row last; its last
    column is the right-hand side.  Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    allowed = np.asarray(allowed, dtype=bool)
    it = 0
    while True:
        candidates = np.flatnonzero((T[m, :-1] < -eps) & allowed)
        if candidates.size == 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it
        q = candidates[0]
        col = T[:m, q]
        rows = np.flatnonzero(col > eps)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        tied = rows[ratios == ratios.min()]
        p = tied[np.argmin(basis[tied])]
        pivot(T, p, q)
        basis[p] = q
        it += 1
