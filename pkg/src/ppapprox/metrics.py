"""Distances between points, point patterns and distributions.

All pattern distances are built on the capped Euclidean distance
``d0(x, y) = min(|x - y|, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, stats
from scipy.spatial.distance import cdist

from .assignment import assignment_cost

__all__ = [
    "PointPattern",
    "CountSample",
    "RealSample",
    "d0",
    "d0_matrix",
    "d1",
    "d1_matrix",
    "empirical_d2",
    "empirical_dtv",
    "empirical_dbw",
    "poisson_pmf",
    "exact_dtv_pmf",
    "dtv_to_poisson",
]

PMF_TAIL = 1e-13


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite multiset of points in ``R^D`` stored as an ``(n, D)`` array."""

    points: np.ndarray
    dim: int

    def __init__(self, points, dim: int | None = None):
        arr = np.asarray(points, dtype=float)
        if arr.size == 0:
            if dim is None:
                dim = arr.shape[1] if arr.ndim == 2 else 0
            arr = np.zeros((0, dim))
        else:
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim != 2:
                raise ValueError("points must be an (n, D) array")
            if dim is not None and arr.shape[1] != dim:
                raise ValueError(f"points have dimension {arr.shape[1]}, expected {dim}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("coordinates must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "dim", int(arr.shape[1]))

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"PointPattern(n={len(self)}, dim={self.dim})"

    def restrict(self, box) -> "PointPattern":
        if len(self) == 0:
            return self
        return PointPattern(self.points[box.contains(self.points)], self.dim)

    def count_in(self, box) -> int:
        if len(self) == 0:
            return 0
        return int(np.count_nonzero(box.contains(self.points)))

    def superpose(self, other: "PointPattern") -> "PointPattern":
        return PointPattern(np.vstack([self.points, other.points]), self.dim)


@dataclass(frozen=True)
class CountSample:
    counts: tuple

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.size == 0:
            raise ValueError("count sample must be nonempty")
        if np.any(c < 0) or np.any(c != np.round(c)):
            raise ValueError("counts must be nonnegative integers")
        object.__setattr__(self, "counts", tuple(int(x) for x in c.ravel()))


@dataclass(frozen=True)
class RealSample:
    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise ValueError("real sample must be nonempty")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", tuple(float(x) for x in v.ravel()))


def _coords(x):
    return x.points if isinstance(x, PointPattern) else np.asarray(x, dtype=float)


def d0(x, y) -> float:
    """Euclidean distance capped at 1."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(min(np.linalg.norm(x - y), 1.0))


def d0_matrix(X, Y) -> np.ndarray:
    X = np.atleast_2d(_coords(X))
    Y = np.atleast_2d(_coords(Y))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return np.minimum(cdist(X, Y), 1.0)


def d1(rho1, rho2) -> float:
    """Mean matched ``d0`` distance under the optimal matching; 1 across cardinalities."""
    a = _coords(rho1)
    b = _coords(rho2)
    n1, n2 = len(a), len(b)
    if n1 != n2:
        return 1.0
    if n1 == 0:
        return 0.0
    if n1 == 1:
        return float(min(np.linalg.norm(a[0] - b[0]), 1.0))
    cost = d0_matrix(a, b)
    return min(assignment_cost(cost) / n1, 1.0)


def d1_matrix(samplesA: Sequence, samplesB: Sequence) -> np.ndarray:
    """Pairwise ``d1`` distances between two lists of patterns."""
    A = [_coords(p) for p in samplesA]
    B = [_coords(p) for p in samplesB]
    out = np.ones((len(A), len(B)))
    sizes_b = np.array([len(b) for b in B])
    for i, a in enumerate(A):
        for j in np.nonzero(sizes_b == len(a))[0]:
            out[i, j] = d1(a, B[j])
    return out


def empirical_d2(samplesA: Sequence, samplesB: Sequence) -> float:
    """Wasserstein distance over ``(M_p, d1)`` between two equally sized empirical samples.

    This is a consistent estimator of the distribution level distance and is
    biased upward for finite sample sizes.
    """
    if len(samplesA) != len(samplesB):
        raise ValueError(f"unequal sample counts {len(samplesA)} and {len(samplesB)}")
    if len(samplesA) == 0:
        raise ValueError("samples must be nonempty")
    cost = d1_matrix(samplesA, samplesB)
    return float(min(assignment_cost(cost) / len(samplesA), 1.0))


def _counts(x) -> np.ndarray:
    c = np.asarray(x.counts if isinstance(x, CountSample) else x)
    if c.size == 0:
        raise ValueError("count sample must be nonempty")
    if np.any(c < 0) or np.any(c != np.round(c)):
        raise ValueError("counts must be nonnegative integers")
    return c.astype(np.int64).ravel()


def empirical_dtv(a, b) -> float:
    """Half the L1 distance between the empirical pmfs of two count samples."""
    ca, cb = _counts(a), _counts(b)
    k = int(max(ca.max(), cb.max())) + 1
    pa = np.bincount(ca, minlength=k) / ca.size
    pb = np.bincount(cb, minlength=k) / cb.size
    return float(0.5 * np.abs(pa - pb).sum())


def empirical_dbw(a, b) -> float:
    """Bounded Wasserstein distance between two empirical distributions on the line.

    Maximises ``mean f(b) - mean f(a)`` over ``f`` with ``|f| <= 1/2`` and
    Lipschitz constant 1.  On the line it suffices to constrain consecutive
    support points, so a linear program over the values of ``f`` on the
    merged sorted support is exact.
    """
    va = np.asarray(a.values if isinstance(a, RealSample) else a, dtype=float).ravel()
    vb = np.asarray(b.values if isinstance(b, RealSample) else b, dtype=float).ravel()
    if va.size == 0 or vb.size == 0:
        raise ValueError("samples must be nonempty")
    support, inv = np.unique(np.concatenate([va, vb]), return_inverse=True)
    k = support.size
    weight = np.zeros(k)
    np.add.at(weight, inv[va.size:], 1.0 / vb.size)
    np.add.at(weight, inv[: va.size], -1.0 / va.size)
    if k == 1:
        return 0.0
    gaps = np.diff(support)
    rows = np.arange(k - 1)
    diff = np.zeros((k - 1, k))
    diff[rows, rows + 1] = 1.0
    diff[rows, rows] = -1.0
    A_ub = np.vstack([diff, -diff])
    b_ub = np.concatenate([gaps, gaps])
    res = optimize.linprog(-weight, A_ub=A_ub, b_ub=b_ub, bounds=[(-0.5, 0.5)] * k, method="highs")
    if res.status != 0:
        raise RuntimeError(f"dBW linear program failed: {res.message}")
    return float(min(max(-res.fun, 0.0), 1.0))


def poisson_pmf(lam: float, tail: float = PMF_TAIL) -> np.ndarray:
    """Poisson pmf on ``0..n`` with ``n`` the first point whose upper tail is below ``tail``."""
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"Poisson mean must be finite and nonnegative, got {lam!r}")
    if lam == 0:
        return np.array([1.0])
    n = int(stats.poisson.isf(tail, lam)) + 1
    while stats.poisson.sf(n, lam) >= tail:
        n += 1
    return stats.poisson.pmf(np.arange(n + 1), lam)


def exact_dtv_pmf(p, q, tol: float = 1e-10) -> tuple[float, float]:
    """Total variation distance of two pmfs on ``0, 1, 2, ...``.

    Returns ``(value, error)`` where ``error`` bounds the effect of the mass
    missing from the truncated arrays.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("pmfs must be nonnegative")
    tp, tq = 1.0 - p.sum(), 1.0 - q.sum()
    if abs(tp) > tol or abs(tq) > tol:
        raise ValueError(f"pmf tail mass {max(abs(tp), abs(tq)):.3g} exceeds tolerance {tol}")
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    return float(0.5 * np.abs(p - q).sum()), 0.5 * (abs(tp) + abs(tq))


def dtv_to_poisson(pmf, lam: float) -> float:
    """Exact ``dTV(L(W), Po(lam))`` for ``W`` with finite support ``0..n`` given by ``pmf``."""
    pmf = np.asarray(pmf, dtype=float).ravel()
    n = pmf.size - 1
    po = stats.poisson.pmf(np.arange(n + 1), lam)
    return float(0.5 * (np.abs(pmf - po).sum() + stats.poisson.sf(n, lam)))
