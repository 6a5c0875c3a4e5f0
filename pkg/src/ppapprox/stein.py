"""Local Stein-Chen bounds for sums of dependent indicators.

For indicators ``I_i`` with a split of the other indices into a strong set
``S_i`` and a weak set, write ``Z_i = sum_{j in S_i} I_j`` and let ``e_i``
measure how much ``I_i`` depends on the weak set.  The bounds below are
explicit in ``p_i = E I_i``, ``E Z_i``, ``E(I_i Z_i)`` and ``e_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GridSpec, cell_of
from .metrics import dtv_to_poisson
from .models import ProcessModel, sample

__all__ = [
    "DependencyGraphSpec",
    "IndicatorStats",
    "log_plus",
    "bound_thm_AA",
    "bound_prop_AC",
    "bound_thm_AD",
    "as_joint_tensor",
    "stats_by_enumeration",
    "e_covariance_form",
    "sum_pmf",
    "exact_dtv_sum_poisson",
    "grid_dependency_graph",
    "stats_by_mc",
]


@dataclass(frozen=True)
class DependencyGraphSpec:
    """Strong neighbourhoods ``S_i``; the weak set is everything else except ``i``."""

    index_count: int
    strong_neighbors: tuple

    def __post_init__(self):
        if self.index_count < 1:
            raise ValueError("index_count must be >= 1")
        if len(self.strong_neighbors) != self.index_count:
            raise ValueError("need one strong neighbourhood per index")
        sets = []
        for i, nb in enumerate(self.strong_neighbors):
            nb = frozenset(int(j) for j in nb)
            if i in nb:
                raise ValueError(f"index {i} lists itself as a strong neighbour")
            if any(j < 0 or j >= self.index_count for j in nb):
                raise ValueError(f"strong neighbour of {i} out of range")
            sets.append(nb)
        object.__setattr__(self, "strong_neighbors", tuple(sets))

    def weak(self, i: int) -> list[int]:
        return [j for j in range(self.index_count) if j != i and j not in self.strong_neighbors[i]]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.index_count, self.index_count), dtype=bool)
        for i, nb in enumerate(self.strong_neighbors):
            A[i, list(nb)] = True
        return A


@dataclass(frozen=True, eq=False)
class IndicatorStats:
    p: np.ndarray
    ez: np.ndarray
    eiz: np.ndarray
    e: np.ndarray
    lam: float
    std_errors: dict = field(default_factory=dict)

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float).ravel() for k in ("p", "ez", "eiz", "e")]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("all per-index arrays must have the same length")
        for name, a in zip(("p", "ez", "eiz", "e"), arrs):
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} entries must be finite and >= 0")
            object.__setattr__(self, name, a)
        if np.any(arrs[0] > 1):
            raise ValueError("probabilities must not exceed 1")
        if not math.isclose(self.lam, arrs[0].sum(), rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("lam must equal the sum of p")

    @classmethod
    def from_arrays(cls, p, ez, eiz, e, std_errors=None) -> "IndicatorStats":
        p = np.asarray(p, dtype=float)
        return cls(p, ez, eiz, e, float(p.sum()), dict(std_errors or {}))

    def positive(self) -> "IndicatorStats":
        """Drop indices with ``p_i = 0``; they contribute nothing to either sum."""
        keep = self.p > 0
        return IndicatorStats(self.p[keep], self.ez[keep], self.eiz[keep], self.e[keep], float(self.p[keep].sum()))

    @property
    def first_sum(self) -> float:
        return float(np.sum(self.p ** 2 + self.p * self.ez + self.eiz))

    @property
    def e_sum(self) -> float:
        return float(np.sum(self.e))


def log_plus(x: float) -> float:
    """``max(log x, 0)``, natural logarithm."""
    return max(math.log(x), 0.0) if x > 0 else 0.0


def _checked(stats: IndicatorStats) -> IndicatorStats:
    s = stats.positive()
    if not s.lam > 0:
        raise ValueError("lambda must be positive")
    return s


def bound_thm_AA(stats: IndicatorStats) -> float:
    """Total variation bound between ``L(W)`` and ``Po(lambda)`` for ``W = sum I_i``."""
    s = _checked(stats)
    lam = s.lam
    return min(1.0, 1.0 / lam) * s.first_sum + min(1.0, 1.0 / math.sqrt(lam)) * s.e_sum


def bound_prop_AC(lam: float, mu: float) -> float:
    """Total variation bound between ``Po(lam)`` and ``Po(mu)``."""
    if not (lam > 0 and mu > 0):
        raise ValueError("both Poisson means must be positive")
    return min(1.0, 1.0 / math.sqrt(lam), 1.0 / math.sqrt(mu)) * abs(lam - mu)


def bound_thm_AD(stats: IndicatorStats) -> float:
    """``d2`` bound between the indicator point process and its Poisson counterpart.

    The bound does not depend on where the indicator points are located.
    """
    s = _checked(stats)
    lam = s.lam
    c1 = min(1.0, (2.0 / lam) * (1.0 + 2.0 * log_plus(lam / 2.0)))
    c2 = min(1.0, 1.65 / math.sqrt(lam))
    return c1 * s.first_sum + c2 * s.e_sum


# ---------------------------------------------------------------------------
# exact oracle on explicit joint distributions


def as_joint_tensor(joint) -> np.ndarray:
    """Joint pmf of ``(I_0, ..., I_{n-1})`` as a tensor with one axis of length 2 per indicator.

    A flat array of length ``2**n`` is read in C order, so ``I_0`` is the
    most significant bit of the flat index.
    """
    arr = np.asarray(joint, dtype=float)
    if arr.ndim == 1:
        n = int(round(math.log2(arr.size))) if arr.size else 0
        if 2 ** n != arr.size or n == 0:
            raise ValueError("flat joint must have length 2**n with n >= 1")
        arr = arr.reshape((2,) * n)
    if any(d != 2 for d in arr.shape):
        raise ValueError("joint tensor must have shape (2,)*n")
    if np.any(arr < 0):
        raise ValueError("joint probabilities must be nonnegative")
    if not math.isclose(arr.sum(), 1.0, abs_tol=1e-12):
        raise ValueError(f"joint sums to {arr.sum()!r}, not 1")
    return arr


def _marginal(joint: np.ndarray, keep: list[int]) -> np.ndarray:
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    marg = joint.sum(axis=drop)
    # sum keeps the remaining axes in increasing order; reorder to match ``keep``
    order = sorted(keep)
    return np.moveaxis(marg, [order.index(k) for k in keep], list(range(len(keep))))


def _weak_differences(joint: np.ndarray, i: int, weak: list[int], p_i: float) -> np.ndarray:
    m = _marginal(joint, [i] + weak)
    return (m[1] - p_i * m.sum(axis=0)).ravel()


def stats_by_enumeration(joint, graph: DependencyGraphSpec) -> IndicatorStats:
    """Exact ``p_i``, ``E Z_i``, ``E(I_i Z_i)`` and ``e_i`` from a joint pmf on ``{0,1}^n``.

    ``e_i = E|E(I_i | weak indicators) - p_i|`` is computed by summing over
    the configurations of the weak indicators, and cross-checked against the
    covariance form ``2 max_B |cov(I_i, 1_B)|``.
    """
    J = as_joint_tensor(joint)
    n = J.ndim
    if n != graph.index_count:
        raise ValueError(f"joint has {n} indicators, graph has {graph.index_count}")
    if n > 20:
        raise ValueError("enumeration is limited to n <= 20 indicators")
    p = np.array([_marginal(J, [i])[1] for i in range(n)])
    pair = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            pair[i, j] = p[i] if i == j else _marginal(J, [i, j])[1, 1]
    A = graph.adjacency()
    ez = (A * p[None, :]).sum(axis=1)
    eiz = (A * pair).sum(axis=1)
    e = np.zeros(n)
    for i in range(n):
        weak = graph.weak(i)
        if not weak:
            continue
        d = _weak_differences(J, i, weak, p[i])
        e[i] = np.abs(d).sum()
        alt = e_covariance_form(J, i, weak)
        if abs(alt - e[i]) > 1e-12:
            raise RuntimeError(f"e_{i}: conditional form {e[i]!r} and covariance form {alt!r} disagree")
    return IndicatorStats.from_arrays(p, ez, eiz, e)


def e_covariance_form(joint, i: int, weak: list[int]) -> float:
    """``2 max_B |cov(I_i, 1_B)|`` over events ``B`` generated by the weak indicators.

    Every such ``B`` is a union of atoms, so the maximum is attained by
    collecting all atoms where the covariance contribution has one sign.
    """
    J = as_joint_tensor(joint)
    if not weak:
        return 0.0
    p_i = _marginal(J, [i])[1]
    d = _weak_differences(J, i, list(weak), p_i)
    return float(2.0 * max(d[d > 0].sum(), -d[d < 0].sum()))


def sum_pmf(joint) -> np.ndarray:
    """pmf of ``W = sum_i I_i`` on ``0..n``."""
    J = as_joint_tensor(joint)
    n = J.ndim
    weights = np.indices((2,) * n).sum(axis=0)
    return np.bincount(weights.ravel(), weights=J.ravel(), minlength=n + 1)


def exact_dtv_sum_poisson(joint) -> float:
    """Exact ``dTV(L(W), Po(E W))``."""
    pmf = sum_pmf(joint)
    lam = float(np.dot(np.arange(pmf.size), pmf))
    return dtv_to_poisson(pmf, lam)


# ---------------------------------------------------------------------------
# grid indicators


def grid_dependency_graph(grid: GridSpec, m: int) -> DependencyGraphSpec:
    """Strong neighbours of a cell: all other cells whose ascertainment index is within ``m`` in sup norm."""
    if m < 0:
        raise ValueError("m must be >= 0")
    d1 = grid.space.d1_dims
    idx = np.array(list(np.ndindex(*grid.shape)))
    l = idx[:, d1:]
    close = np.max(np.abs(l[:, None, :] - l[None, :, :]), axis=2) <= m
    np.fill_diagonal(close, False)
    return DependencyGraphSpec(len(idx), tuple(frozenset(np.nonzero(row)[0].tolist()) for row in close))


def stats_by_mc(model: ProcessModel, grid: GridSpec, graph: DependencyGraphSpec, mc_n: int, seed) -> IndicatorStats:
    """Monte Carlo estimates of ``p``, ``E Z`` and ``E(I Z)`` for the cell indicators ``1{xi(C) >= 1}``.

    ``e`` is left at zero; it is bounded through the mixing certificate instead.
    Standard errors are stored under ``std_errors``.
    """
    if mc_n < 1000:
        raise ValueError("mc_n must be at least 1000")
    if graph.index_count != grid.n_cells:
        raise ValueError("graph size does not match the grid")
    window = grid.window
    ind = np.zeros((mc_n, grid.n_cells))
    for r, child in enumerate(np.random.SeedSequence(int(seed)).spawn(mc_n)):
        pat = sample(model, window, child)
        if len(pat):
            flat = grid.flat_index(cell_of(grid, pat.points))
            ind[r, flat] = 1.0
    A = graph.adjacency().astype(float)
    Z = ind @ A.T
    IZ = ind * Z
    root = math.sqrt(mc_n)
    se = {
        "p": ind.std(axis=0, ddof=1) / root,
        "ez": Z.std(axis=0, ddof=1) / root,
        "eiz": IZ.std(axis=0, ddof=1) / root,
    }
    return IndicatorStats.from_arrays(ind.mean(axis=0), Z.mean(axis=0), IZ.mean(axis=0), np.zeros(grid.n_cells), se)
