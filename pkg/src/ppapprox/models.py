"""Point process models with condition certificates.

Every model carries a :class:`ConditionCertificate` with the density bounds
``kappa`` and ``iota``, an orderliness function ``alpha_check`` and a mixing
decay ``beta_check``.  The derivation of each certificate is recorded in its
``derivation`` field, and :func:`verify_orderliness` checks the orderliness
part by simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np
from scipy import special

from .geometry import Box, SpaceConfig
from .metrics import PointPattern

__all__ = [
    "MixingKind",
    "PowerAlpha",
    "PowerBeta",
    "FiniteRangeBeta",
    "GeometricBeta",
    "ScaledBeta",
    "ConditionCertificate",
    "DensitySpec",
    "HomogeneousPoisson",
    "InhomogeneousPoisson",
    "ClusterBounded",
    "MarkovModulated",
    "ProcessModel",
    "make_rng",
    "mu_volume",
    "orderliness_v",
    "sample",
    "expectation_measure",
    "certificate_for",
    "dobrushin_coefficient",
    "OrderlinessRow",
    "verify_orderliness",
    "unit_ball_volume",
]


class MixingKind(str, Enum):
    RHO = "rho"
    BETA = "beta"
    PHI = "phi"


# ---------------------------------------------------------------------------
# alpha / beta function families


@dataclass(frozen=True)
class PowerAlpha:
    """``alpha(v) = c * v**r``; ``c = 0`` encodes the zero function."""

    c: float
    r: float = 1.0

    def __post_init__(self):
        if self.c < 0 or not math.isfinite(self.c):
            raise ValueError(f"alpha constant must be finite and >= 0, got {self.c!r}")
        if not self.r > 0:
            raise ValueError(f"alpha exponent must be > 0, got {self.r!r}")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "r", float(self.r))

    def __call__(self, v):
        return self.c * np.power(v, self.r) if isinstance(v, np.ndarray) else self.c * float(v) ** self.r


@dataclass(frozen=True)
class PowerBeta:
    """``beta(u) = c * (1 + u)**(-p)``.

    In the ``(1 + s) D2 / 2`` parametrisation of the decay rate,
    ``s = 2 p / D2 - 1``.
    """

    c: float
    p: float

    def __post_init__(self):
        if self.c < 0 or not math.isfinite(self.c):
            raise ValueError(f"beta constant must be finite and >= 0, got {self.c!r}")
        if not self.p > 0:
            raise ValueError(f"beta exponent must be > 0, got {self.p!r}")

    def __call__(self, u):
        if isinstance(u, np.ndarray):
            return self.c * np.power(1.0 + u, -self.p)
        return self.c * (1.0 + float(u)) ** (-self.p)

    def s_for(self, d2_dims: int) -> float:
        return 2.0 * self.p / d2_dims - 1.0


@dataclass(frozen=True)
class FiniteRangeBeta:
    """``beta(u) = c * 1{u < u0}``."""

    c: float
    u0: float

    def __post_init__(self):
        if self.c < 0 or self.u0 < 0:
            raise ValueError("finite-range beta needs c >= 0 and u0 >= 0")

    def __call__(self, u):
        if isinstance(u, np.ndarray):
            return np.where(u < self.u0, self.c, 0.0)
        return self.c if u < self.u0 else 0.0


@dataclass(frozen=True)
class GeometricBeta:
    """``beta(u) = min(1, c * gamma**floor(u))``.

    Mixing coefficients never exceed 1, so the cap costs nothing.
    """

    c: float
    gamma: float

    def __post_init__(self):
        if self.c < 0 or not (0 <= self.gamma < 1):
            raise ValueError("geometric beta needs c >= 0 and 0 <= gamma < 1")

    def __call__(self, u):
        if isinstance(u, np.ndarray):
            return np.minimum(1.0, self.c * np.power(self.gamma, np.floor(u)))
        return min(1.0, self.c * self.gamma ** math.floor(u))


@dataclass(frozen=True)
class ScaledBeta:
    """``min(1, factor * base(u))``; used to pass a phi certificate to the rho theorems."""

    base: Union[PowerBeta, FiniteRangeBeta, GeometricBeta]
    factor: float

    def __call__(self, u):
        if isinstance(u, np.ndarray):
            return np.minimum(1.0, self.factor * self.base(u))
        return min(1.0, self.factor * self.base(u))


BetaFamily = Union[PowerBeta, FiniteRangeBeta, GeometricBeta, ScaledBeta]


@dataclass(frozen=True)
class ConditionCertificate:
    """Witnesses for the density bounds, orderliness and mixing conditions."""

    kappa: float
    iota: float
    alpha_check: PowerAlpha
    beta_check: BetaFamily
    mixing_kind: MixingKind
    derivation: str = ""
    phi_symmetric: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mixing_kind", MixingKind(self.mixing_kind))
        if self.kappa < 0 or self.iota < 0:
            raise ValueError("kappa and iota must be nonnegative")
        if self.iota > self.kappa * (1 + 1e-12):
            raise ValueError(f"iota={self.iota} exceeds kappa={self.kappa}")
        if self.alpha_check(0.0) != 0.0:
            raise ValueError("alpha_check must vanish at 0")
        u = np.linspace(0.0, 50.0, 501)
        if np.any(np.diff(self.beta_check(u)) > 1e-15):
            raise ValueError("beta_check must be nonincreasing")

    def beta_for(self, kind: MixingKind) -> BetaFamily:
        """Decay function usable by a theorem that assumes mixing of ``kind``.

        A phi bound also bounds beta.  For rho we use
        ``rho(B, C) <= 2 sqrt(phi(B, C) phi(C, B))``: with ``phi_symmetric`` the
        certificate bounds phi in both directions and rho is at most
        ``2 beta_check``, otherwise only ``2 sqrt(beta_check)`` is available.
        """
        kind = MixingKind(kind)
        own = self.mixing_kind
        if kind == own:
            return self.beta_check
        if kind == MixingKind.BETA and own == MixingKind.PHI:
            return self.beta_check
        if kind == MixingKind.RHO and own == MixingKind.PHI:
            return ScaledBeta(self.beta_check, 2.0) if self.phi_symmetric else _SqrtBeta(self.beta_check)
        raise ValueError(f"a {own.value}-mixing certificate does not support theorems assuming {kind.value}-mixing")


@dataclass(frozen=True)
class _SqrtBeta:
    base: BetaFamily

    def __call__(self, u):
        if isinstance(u, np.ndarray):
            return np.minimum(1.0, 2.0 * np.sqrt(self.base(u)))
        return min(1.0, 2.0 * math.sqrt(self.base(u)))


# ---------------------------------------------------------------------------
# densities


class DensityForm(str, Enum):
    CONSTANT = "constant"
    SEPARABLE_QUADRATIC = "separable_quadratic"
    CUSTOM_TABLE = "custom_table"


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """A density ``p(s, t) = p(s)`` that is constant in the ascertainment directions.

    ``constant``: ``p = ell``.  ``separable_quadratic``: ``p(s) = a + b |s|^2``.
    ``custom_table``: piecewise constant on the tensor grid ``table_edges``
    (one edge array per data coordinate) with values ``table_values``.
    """

    form: DensityForm
    ell: float = 0.0
    a: float = 0.0
    b: float = 0.0
    table_edges: tuple = ()
    table_values: np.ndarray | None = None
    regularity: tuple | None = None
    smooth2: bool = False

    def __post_init__(self):
        object.__setattr__(self, "form", DensityForm(self.form))
        if self.form is DensityForm.CONSTANT:
            if self.ell < 0:
                raise ValueError("constant density must be >= 0")
            object.__setattr__(self, "smooth2", True)
        elif self.form is DensityForm.SEPARABLE_QUADRATIC:
            if self.a < 0:
                raise ValueError("quadratic density needs a >= 0")
            object.__setattr__(self, "smooth2", True)
        else:
            if self.table_values is None or not self.table_edges:
                raise ValueError("custom_table needs table_edges and table_values")
            edges = tuple(np.asarray(e, dtype=float) for e in self.table_edges)
            vals = np.asarray(self.table_values, dtype=float)
            if vals.shape != tuple(len(e) - 1 for e in edges):
                raise ValueError("table_values shape must match the edge arrays")
            if np.any(vals < 0) or any(np.any(np.diff(e) <= 0) for e in edges):
                raise ValueError("table needs nonnegative values and increasing edges")
            object.__setattr__(self, "table_edges", edges)
            object.__setattr__(self, "table_values", vals)
        if self.regularity is not None:
            L, z = self.regularity
            if L < 0 or z <= 0:
                raise ValueError("regularity needs L >= 0 and z > 0")

    @classmethod
    def constant(cls, ell: float) -> "DensitySpec":
        return cls(DensityForm.CONSTANT, ell=ell, regularity=(0.0, 1.0))

    @classmethod
    def quadratic(cls, a: float, b: float) -> "DensitySpec":
        return cls(DensityForm.SEPARABLE_QUADRATIC, a=a, b=b)

    def evaluate(self, s) -> np.ndarray:
        """Density at data coordinates ``s`` of shape ``(n, D1)``."""
        s = np.atleast_2d(np.asarray(s, dtype=float))
        if self.form is DensityForm.CONSTANT:
            return np.full(s.shape[0], self.ell)
        if self.form is DensityForm.SEPARABLE_QUADRATIC:
            return self.a + self.b * np.sum(s * s, axis=1)
        idx = []
        for j, e in enumerate(self.table_edges):
            col = s[:, j]
            if np.any((col < e[0]) | (col > e[-1])):
                raise ValueError("point outside the density table")
            idx.append(np.clip(np.searchsorted(e, col, side="right") - 1, 0, len(e) - 2))
        return self.table_values[tuple(idx)]

    def value_at_zero(self, d1: int) -> float:
        return float(self.evaluate(np.zeros((1, d1)))[0])

    def laplacian_at_zero(self, d1: int) -> float:
        if self.form is DensityForm.CONSTANT:
            return 0.0
        if self.form is DensityForm.SEPARABLE_QUADRATIC:
            return 2.0 * self.b * d1
        raise ValueError("a tabulated density has no Laplacian")

    def bounds_on(self, s_box: Box) -> tuple[float, float]:
        """``(inf p, sup p)`` over the data box."""
        if self.form is DensityForm.CONSTANT:
            return self.ell, self.ell
        lo, hi = np.asarray(s_box.lower), np.asarray(s_box.upper)
        if self.form is DensityForm.SEPARABLE_QUADRATIC:
            rmax = np.sum(np.maximum(lo * lo, hi * hi))
            rmin = np.sum(np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi)))
            vals = (self.a + self.b * rmin, self.a + self.b * rmax)
            return min(vals), max(vals)
        sel = []
        for j, e in enumerate(self.table_edges):
            if lo[j] < e[0] or hi[j] > e[-1]:
                raise ValueError("box extends beyond the density table")
            first = max(np.searchsorted(e, lo[j], side="right") - 1, 0)
            last = min(np.searchsorted(e, hi[j], side="left"), len(e) - 1)
            sel.append(slice(first, max(last, first + 1)))
        block = self.table_values[tuple(sel)]
        return float(block.min()), float(block.max())

    def integral_on(self, s_box: Box) -> float:
        """``int p ds`` over a data box (Lebesgue measure)."""
        lo, hi = np.asarray(s_box.lower), np.asarray(s_box.upper)
        widths = hi - lo
        vol = float(np.prod(widths))
        if self.form is DensityForm.CONSTANT:
            return self.ell * vol
        if self.form is DensityForm.SEPARABLE_QUADRATIC:
            total = self.a * vol
            for j in range(len(lo)):
                others = np.prod(np.delete(widths, j))
                total += self.b * others * (hi[j] ** 3 - lo[j] ** 3) / 3.0
            return float(total)
        clipped = []
        for j, e in enumerate(self.table_edges):
            clipped.append(np.clip(np.minimum(e[1:], hi[j]) - np.maximum(e[:-1], lo[j]), 0.0, None))
        weights = clipped[0]
        for c in clipped[1:]:
            weights = np.multiply.outer(weights, c)
        return float(np.sum(weights * self.table_values))


# ---------------------------------------------------------------------------
# process models


@dataclass(frozen=True)
class HomogeneousPoisson:
    ell: float

    def __post_init__(self):
        if self.ell < 0 or not math.isfinite(self.ell):
            raise ValueError("intensity must be finite and >= 0")


@dataclass(frozen=True)
class InhomogeneousPoisson:
    density: DensitySpec


@dataclass(frozen=True)
class ClusterBounded:
    """Neyman-Scott process with bounded clusters.

    Parents form a homogeneous Poisson process of rate ``parent_rate``; each
    parent has ``N`` offspring with ``P[N = k] = size_pmf[k]``, placed
    independently and uniformly in the ball of radius ``radius`` around it.
    The parents themselves are not part of the pattern.
    """

    parent_rate: float
    size_pmf: tuple
    radius: float

    def __post_init__(self):
        pmf = np.asarray(self.size_pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0) or not math.isclose(pmf.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("size_pmf must be a probability vector over 0..cluster_count_max")
        if self.parent_rate < 0 or self.radius <= 0:
            raise ValueError("need parent_rate >= 0 and radius > 0")
        object.__setattr__(self, "size_pmf", tuple(float(x) for x in pmf))

    @property
    def cluster_count_max(self) -> int:
        return len(self.size_pmf) - 1

    @property
    def mean_size(self) -> float:
        return float(np.dot(np.arange(len(self.size_pmf)), self.size_pmf))

    @property
    def factorial_moment2(self) -> float:
        k = np.arange(len(self.size_pmf))
        return float(np.dot(k * (k - 1), self.size_pmf))

    @property
    def intensity(self) -> float:
        return self.parent_rate * self.mean_size


@dataclass(frozen=True)
class MarkovModulated:
    """Poisson counts on the lattice ``Z + 1/2`` modulated by a stationary Markov chain.

    Along the single ascertainment axis, site ``t`` carries a hidden state
    ``X_t`` of a stationary chain with transition matrix ``P``.  Given the
    states, the points at site ``t`` form a Poisson process on the data
    coordinates with constant rate ``rates[X_t]``.
    """

    transition: tuple
    rates: tuple

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != r.size:
            raise ValueError("transition must be square and match the number of rates")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("transition matrix must be row-stochastic")
        if np.any(r < 0):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "transition", tuple(tuple(float(x) for x in row) for row in P))
        object.__setattr__(self, "rates", tuple(float(x) for x in r))

    @property
    def P(self) -> np.ndarray:
        return np.asarray(self.transition)

    @property
    def stationary(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.P.T)
        k = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, k])
        pi = np.abs(pi) / np.abs(pi).sum()
        return pi

    @property
    def mean_rate(self) -> float:
        return float(np.dot(self.stationary, self.rates))


Variant = Union[HomogeneousPoisson, InhomogeneousPoisson, ClusterBounded, MarkovModulated]


@dataclass(frozen=True)
class ProcessModel:
    variant: Variant
    space: SpaceConfig
    s_window: Box | None = field(default=None)

    def __post_init__(self):
        if self.s_window is None:
            d1 = self.space.d1_dims
            object.__setattr__(self, "s_window", Box((-1.0,) * d1, (1.0,) * d1))
        if isinstance(self.variant, ClusterBounded) and self.space.counting:
            raise ValueError("the cluster model is defined for Lebesgue reference measure only")
        if isinstance(self.variant, MarkovModulated):
            if not self.space.counting or self.space.d2_dims != 1:
                raise ValueError("the Markov-modulated model needs counting measure and D2 = 1")

    @property
    def certificate(self) -> ConditionCertificate:
        return certificate_for(self)


# ---------------------------------------------------------------------------
# measures and sampling


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator for an integer seed or a :class:`numpy.random.SeedSequence`."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def _lattice_sites(lo: float, hi: float) -> np.ndarray:
    """Points of ``Z + 1/2`` inside ``[lo, hi]`` (exact half-integer arithmetic)."""
    first = math.ceil(lo - 0.5)
    last = math.floor(hi - 0.5)
    return np.arange(first, last + 1) + 0.5


def _mu2(space: SpaceConfig, lower, upper) -> float:
    if space.counting:
        return float(np.prod([len(_lattice_sites(lo, hi)) for lo, hi in zip(lower, upper)]))
    return float(np.prod(np.asarray(upper) - np.asarray(lower)))


def mu_volume(space: SpaceConfig, box: Box) -> float:
    """``mu(box)``: Lebesgue in the data directions times ``mu2`` in the others."""
    d1 = space.d1_dims
    vol = float(np.prod(box.widths[:d1]))
    return vol * _mu2(space, box.lower[d1:], box.upper[d1:])


def orderliness_v(space: SpaceConfig, box: Box) -> float:
    """The size ``v(C)`` in the orderliness condition, with each ascertainment side inflated by 1."""
    d1 = space.d1_dims
    lo, hi = list(box.lower), list(box.upper)
    inflated = Box(tuple(lo), tuple(hi[:d1] + [x + 1.0 for x in hi[d1:]]))
    return mu_volume(space, inflated)


def expectation_measure(model: ProcessModel, box: Box) -> float:
    """``nu(box)``, the expected number of points in the box."""
    space, var = model.space, model.variant
    if isinstance(var, HomogeneousPoisson):
        return var.ell * mu_volume(space, box)
    if isinstance(var, ClusterBounded):
        return var.intensity * mu_volume(space, box)
    if isinstance(var, MarkovModulated):
        return var.mean_rate * mu_volume(space, box)
    s_box, t_box = box.split(space.d1_dims)
    return var.density.integral_on(s_box) * _mu2(space, t_box.lower, t_box.upper)


def _uniform_in_box(rng, space: SpaceConfig, box: Box, n: int) -> np.ndarray:
    d1 = space.d1_dims
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    pts = np.empty((n, space.dim))
    pts[:, :d1] = rng.uniform(lo[:d1], hi[:d1], size=(n, d1))
    if space.counting:
        for j in range(d1, space.dim):
            sites = _lattice_sites(lo[j], hi[j])
            pts[:, j] = sites[rng.integers(0, len(sites), size=n)] if len(sites) else np.nan
    else:
        pts[:, d1:] = rng.uniform(lo[d1:], hi[d1:], size=(n, space.d2_dims))
    return pts


def sample(model: ProcessModel, window: Box, seed) -> PointPattern:
    """Exact simulation of the model restricted to ``window``; deterministic given ``seed``."""
    space, var = model.space, model.variant
    if window.dim != space.dim:
        raise ValueError(f"window has dimension {window.dim}, model lives in {space.dim}")
    rng = make_rng(seed)
    if isinstance(var, HomogeneousPoisson):
        n = rng.poisson(var.ell * mu_volume(space, window))
        return PointPattern(_uniform_in_box(rng, space, window, n), space.dim)
    if isinstance(var, InhomogeneousPoisson):
        return _sample_inhomogeneous(rng, model, window)
    if isinstance(var, ClusterBounded):
        return _sample_cluster(rng, model, window)
    return _sample_markov(rng, model, window)


def _sample_inhomogeneous(rng, model, window):
    space, dens = model.space, model.variant.density
    kappa = certificate_for(model).kappa
    s_box, _ = window.split(space.d1_dims)
    if dens.bounds_on(s_box)[1] > kappa * (1 + 1e-12):
        raise ValueError("density exceeds the rejection envelope kappa on this window")
    n = rng.poisson(expectation_measure(model, window))
    if n == 0 or kappa == 0:
        return PointPattern(np.zeros((0, space.dim)), space.dim)
    out = []
    need = n
    while need > 0:
        batch = max(2 * need, 64)
        cand = _uniform_in_box(rng, space, window, batch)
        keep = rng.uniform(0.0, kappa, size=batch) < dens.evaluate(cand[:, : space.d1_dims])
        acc = cand[keep][:need]
        out.append(acc)
        need -= len(acc)
    return PointPattern(np.vstack(out), space.dim)


def _uniform_in_ball(rng, n: int, dim: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.uniform(size=(n, 1)) ** (1.0 / dim))


def _sample_cluster(rng, model, window):
    space, var = model.space, model.variant
    big = window.inflate(var.radius)
    n_par = rng.poisson(var.parent_rate * big.volume())
    parents = rng.uniform(big.lower, big.upper, size=(n_par, space.dim))
    sizes = rng.choice(len(var.size_pmf), size=n_par, p=var.size_pmf)
    centers = np.repeat(parents, sizes, axis=0)
    pts = centers + _uniform_in_ball(rng, len(centers), space.dim, var.radius)
    return PointPattern(pts[window.contains(pts)] if len(pts) else pts, space.dim)


def _sample_markov(rng, model, window):
    space, var = model.space, model.variant
    d1 = space.d1_dims
    sites = _lattice_sites(window.lower[d1], window.upper[d1])
    if len(sites) == 0:
        return PointPattern(np.zeros((0, space.dim)), space.dim)
    P = var.P
    cum = np.cumsum(P, axis=1)
    states = np.empty(len(sites), dtype=np.int64)
    states[0] = rng.choice(len(var.rates), p=var.stationary)
    u = rng.uniform(size=len(sites))
    for i in range(1, len(sites)):
        states[i] = min(int(np.searchsorted(cum[states[i - 1]], u[i], side="right")), len(var.rates) - 1)
    s_box, _ = window.split(d1)
    area = s_box.volume()
    counts = rng.poisson(np.asarray(var.rates)[states] * area)
    total = int(counts.sum())
    pts = np.empty((total, space.dim))
    pts[:, :d1] = rng.uniform(s_box.lower, s_box.upper, size=(total, d1))
    pts[:, d1] = np.repeat(sites, counts)
    return PointPattern(pts, space.dim)


# ---------------------------------------------------------------------------
# certificates


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / special.gamma(d / 2 + 1)


def dobrushin_coefficient(P) -> float:
    """Half the largest L1 distance between two rows of ``P``."""
    P = np.asarray(P, dtype=float)
    diff = np.abs(P[:, None, :] - P[None, :, :]).sum(axis=2)
    return float(0.5 * diff.max())


def certificate_for(model: ProcessModel) -> ConditionCertificate:
    """Certificate for the model on the window family ``s in s_window`` (all ``t``)."""
    var = model.variant
    if isinstance(var, HomogeneousPoisson):
        k = var.ell
        return ConditionCertificate(
            kappa=k, iota=k, alpha_check=PowerAlpha(2 * k * k, 1.0), beta_check=FiniteRangeBeta(0.0, 0.0),
            mixing_kind=MixingKind.PHI,
            derivation="Poisson: E[N^2 1{N>=2}] = lam^2 + lam(1 - e^-lam) <= 2 lam^2, lam <= kappa v; independent increments.",
        )
    if isinstance(var, InhomogeneousPoisson):
        iota, kappa = var.density.bounds_on(model.s_window)
        return ConditionCertificate(
            kappa=kappa, iota=iota, alpha_check=PowerAlpha(2 * kappa * kappa, 1.0),
            beta_check=FiniteRangeBeta(0.0, 0.0), mixing_kind=MixingKind.PHI,
            derivation="Poisson with density bounds from the data window; same orderliness argument as the homogeneous case.",
        )
    if isinstance(var, ClusterBounded):
        ell = var.intensity
        ball = unit_ball_volume(model.space.dim) * var.radius ** model.space.dim
        pair = ell * ell + var.parent_rate * var.factorial_moment2 / ball
        c_alpha = 2.0 * (2.0 * pair)
        return ConditionCertificate(
            kappa=ell, iota=ell, alpha_check=PowerAlpha(c_alpha, 1.0),
            beta_check=FiniteRangeBeta(1.0, 2.0 * var.radius), mixing_kind=MixingKind.PHI,
            derivation=(
                "x^2 <= 2x(x-1) for x >= 2 and the pair correlation density is at most "
                "ell^2 + parent_rate E[N(N-1)] / |B_R|, so E[X^2 1{X>=2}] <= 2 (that) |C|^2 <= 2 (that) v^2; "
                "a safety factor 2 is applied.  Sets separated by 2R are independent."
            ),
        )
    if isinstance(var, MarkovModulated):
        P = var.P
        pi = var.stationary
        safe = np.where(pi > 0, pi, 1.0)
        reversed_chain = P.T * pi[None, :] / safe[:, None]
        gamma = max(dobrushin_coefficient(P), dobrushin_coefficient(reversed_chain))
        rmax = max(var.rates)
        mean = var.mean_rate
        return ConditionCertificate(
            kappa=mean, iota=mean, alpha_check=PowerAlpha(2.0 * rmax * rmax, 1.0),
            beta_check=GeometricBeta(2.0 * gamma, gamma), mixing_kind=MixingKind.PHI,
            derivation=(
                "Given the states the counts are Poisson with mean at most rmax v, hence "
                "E[X^2 1{X>=2}] <= 2 rmax^2 v^2.  Sets at distance u are separated by at least floor(u)+1 "
                "chain steps on each side, and the forward and time-reversed chains each contract by their "
                "Dobrushin coefficient per step."
            ),
        )
    raise ValueError(f"no certificate family for {type(var).__name__}")


# ---------------------------------------------------------------------------
# orderliness verification


@dataclass(frozen=True)
class OrderlinessRow:
    box: Box
    v: float
    estimate: float
    std_error: float
    bound: float
    ratio: float
    ratio_lower: float
    ratio_upper: float
    violated: bool


def verify_orderliness(model: ProcessModel, rectangles, mc_n: int, seed, certificate: ConditionCertificate | None = None):
    """Monte Carlo check of ``E[X^2 1{X >= 2}] <= v alpha(v)`` for each rectangle.

    A rectangle is flagged when the lower end of the three-standard-error band
    of the ratio estimate/bound exceeds 1.
    """
    if mc_n < 1000:
        raise ValueError("mc_n must be at least 1000")
    cert = certificate or certificate_for(model)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    rows = []
    for box, child in zip(rectangles, ss.spawn(len(rectangles))):
        seeds = child.spawn(mc_n)
        x = np.array([len(sample(model, box, s)) for s in seeds], dtype=float)
        y = np.where(x >= 2, x * x, 0.0)
        est = float(y.mean())
        se = float(y.std(ddof=1) / math.sqrt(mc_n))
        v = orderliness_v(model.space, box)
        bound = v * cert.alpha_check(v)
        if bound > 0:
            ratio, lo, hi = est / bound, (est - 3 * se) / bound, (est + 3 * se) / bound
        else:
            ratio = 0.0 if est == 0 else math.inf
            lo = hi = ratio
        rows.append(OrderlinessRow(box, v, est, se, bound, ratio, lo, hi, bool(lo > 1)))
    return rows
