"""Exact linear assignment by shortest augmenting paths.

This is the classical O(n^3) Hungarian scheme with row/column potentials
(Kuhn-Munkres in the Jonker-Volgenant formulation).  Each row is inserted
by a Dijkstra-like search over reduced costs; the inner scan over columns
is vectorised with numpy.
"""
from __future__ import annotations

import numpy as np

__all__ = ["linear_assignment", "assignment_cost"]


def linear_assignment(cost) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-cost assignment of rows to columns.

    Parameters
    ----------
    cost : array_like, shape (n, m) with n <= m
        Finite real costs.  Rectangular problems assign every row.

    Returns
    -------
    rows, cols : ndarray of int
        ``rows[i]`` is matched to ``cols[i]``; rows are returned in order.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError("cost must be a 2-d array")
    transposed = False
    if c.shape[0] > c.shape[1]:
        c = c.T
        transposed = True
    n, m = c.shape
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite")

    # 1-based arrays; index 0 is the virtual source column.
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)  # row matched to column j (0 = free)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            reduced = c[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            candidates = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = candidates[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    cols_of_row = np.empty(n, dtype=np.int64)
    assigned = np.nonzero(owner[1:])[0]
    cols_of_row[owner[1:][assigned] - 1] = assigned
    rows = np.arange(n, dtype=np.int64)
    if transposed:
        order = np.argsort(cols_of_row)
        return cols_of_row[order], rows[order]
    return rows, cols_of_row


def assignment_cost(cost) -> float:
    """Optimal total cost of :func:`linear_assignment`."""
    c = np.asarray(cost, dtype=float)
    rows, cols = linear_assignment(c)
    return float(c[rows, cols].sum())
