"""Kernel estimation of the density at the origin of the data space.

The estimator looks at the points of the observation window ``J_T`` and
weights each point by a kernel of width ``w^{-1/D1}`` in the data
directions::

    p_hat = (1 / |J_T|) * sum 2^{D1} K(w^{1/D1} s)

with ``|J_T| = 2^D T / w``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .geometry import SpaceConfig, window_JT
from .metrics import PointPattern, empirical_dbw
from .models import (
    ClusterBounded,
    ConditionCertificate,
    DensitySpec,
    HomogeneousPoisson,
    InhomogeneousPoisson,
    MarkovModulated,
    ProcessModel,
    sample,
)

__all__ = [
    "KernelSpec",
    "uniform_kernel",
    "triangular_kernel",
    "KernelValidation",
    "validate_kernel",
    "estimate_density_at_zero",
    "delta_T",
    "DensityBoundReport",
    "bound_thm_3A",
    "bound_thm_3C",
    "DensityExperiment",
    "mc_density_experiment",
]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel on ``R^{D1}`` supported in ``[-1, 1]^{D1}``.

    ``evaluate`` maps an ``(n, D1)`` array to ``n`` values.  ``l2_norm`` and
    ``second_moment`` are computed by quadrature when not supplied.
    """

    evaluate: Callable
    d1_dims: int
    lipschitz_l: float
    l2_norm: float | None = None
    second_moment: float | None = None
    symmetric: bool = True
    name: str = "custom"

    def __post_init__(self):
        if self.d1_dims < 1 or self.d1_dims > 3:
            raise ValueError("kernels are supported for 1 <= D1 <= 3")
        if self.lipschitz_l < 0:
            raise ValueError("Lipschitz constant must be >= 0")
        if self.l2_norm is None:
            object.__setattr__(self, "l2_norm", math.sqrt(_integrate(lambda s: self(s) ** 2, self.d1_dims)))
        if self.second_moment is None:
            object.__setattr__(self, "second_moment", _integrate(lambda s: s[:, 0] ** 2 * self(s), self.d1_dims))

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=float))
        inside = np.all(np.abs(s) <= 1.0, axis=1)
        out = np.zeros(s.shape[0])
        if np.any(inside):
            out[inside] = self.evaluate(s[inside])
        return out


def _integrate(f, d1: int) -> float:
    """Adaptive quadrature over ``[-1, 1]^{d1}`` with a breakpoint at 0 in each coordinate."""

    def scalar(*x):
        return float(f(np.array([x]))[0])

    val, _ = integrate.nquad(scalar, [[-1.0, 1.0]] * d1, opts={"points": [0.0], "epsabs": 1e-11, "epsrel": 1e-10})
    return float(val)


def uniform_kernel(d1: int = 1) -> KernelSpec:
    """``K = 2^{-D1}`` on the cube; constant inside, so ``l(K) = 0``."""
    c = 2.0 ** (-d1)
    return KernelSpec(
        evaluate=lambda s: np.full(s.shape[0], c),
        d1_dims=d1,
        lipschitz_l=0.0,
        l2_norm=2.0 ** (-d1 / 2),
        second_moment=1.0 / 3.0,
        name="uniform",
    )


def triangular_kernel(d1: int = 1) -> KernelSpec:
    """Product kernel ``prod (1 - |s_i|)``; its gradient has norm at most ``sqrt(D1)``."""
    return KernelSpec(
        evaluate=lambda s: np.prod(1.0 - np.abs(s), axis=1),
        d1_dims=d1,
        lipschitz_l=math.sqrt(d1),
        l2_norm=(2.0 / 3.0) ** (d1 / 2),
        second_moment=1.0 / 6.0,
        name="triangular",
    )


@dataclass(frozen=True)
class KernelValidation:
    ok: bool
    mass: float
    first_moments: tuple
    max_outside: float
    max_lipschitz_ratio: float
    problems: tuple = ()


def validate_kernel(kernel: KernelSpec, n_random: int = 20000, seed: int = 0) -> KernelValidation:
    """Check support, unit mass, zero mean and the Lipschitz constant.

    The Lipschitz ratio is sampled on pairs inside the cube, which is where
    the estimator evaluates the kernel.
    """
    rng = np.random.default_rng(seed)
    d1 = kernel.d1_dims
    problems = []
    outside = rng.uniform(-3, 3, size=(n_random, d1))
    outside = outside[np.any(np.abs(outside) > 1, axis=1)]
    max_out = float(np.abs(kernel(outside)).max()) if len(outside) else 0.0
    if max_out > 0:
        problems.append("kernel does not vanish outside the unit cube")
    mass = _integrate(kernel, d1)
    if abs(mass - 1.0) > 1e-6:
        problems.append(f"kernel integrates to {mass:.9g}, not 1")
    firsts = tuple(_integrate(lambda s, j=j: s[:, j] * kernel(s), d1) for j in range(d1))
    if any(abs(f) > 1e-6 for f in firsts):
        problems.append(f"kernel has nonzero first moments {firsts}")
    x = rng.uniform(-1, 1, size=(n_random, d1))
    y = np.clip(x + rng.normal(scale=rng.choice([1e-3, 1e-1, 1.0], size=(n_random, 1)), size=(n_random, d1)), -1, 1)
    dist = np.minimum(np.linalg.norm(x - y, axis=1), 1.0)
    keep = dist > 0
    ratio = np.abs(kernel(x) - kernel(y))[keep] / dist[keep]
    max_ratio = float(ratio.max()) if ratio.size else 0.0
    if max_ratio > kernel.lipschitz_l * (1 + 1e-6) + 1e-12:
        problems.append(f"observed Lipschitz ratio {max_ratio:.6g} exceeds l(K) = {kernel.lipschitz_l}")
    return KernelValidation(not problems, mass, firsts, max_out, max_ratio, tuple(problems))


def _window_volume(space_dim: int, T: float, w: float) -> float:
    return 2.0 ** space_dim * T / w


def estimate_density_at_zero(pattern: PointPattern, kernel: KernelSpec, T: float, w: float) -> float:
    """Kernel estimate of ``p(0)`` from the points of ``pattern`` (given in ``J_T`` coordinates).

    ``|J_T| = 2^D T / w`` under either reference measure in the ascertainment
    directions (under counting measure ``T = n^{D2}`` and each unit cell
    holds one lattice site).
    """
    if len(pattern) == 0:
        return 0.0
    d1 = kernel.d1_dims
    s = pattern.points[:, :d1] * w ** (1.0 / d1)
    return float(2.0 ** d1 * kernel(s).sum() / _window_volume(pattern.dim, T, w))


def delta_T(M: int, kappa: float, nu: float) -> float:
    """``2 kappa nu^M e^{-nu} / M!``, evaluated in log space."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if nu == 0:
        return 0.0
    return float(2.0 * kappa * math.exp(M * math.log(nu) - nu - special.gammaln(M + 1)))


@dataclass(frozen=True)
class DensityBoundReport:
    total: float
    terms: dict
    flags: tuple = ()


def bound_thm_3A(d2_bound: float, kernel: KernelSpec, M: int, certificate: ConditionCertificate, T: float, w: float,
                 nu: float | None = None, space: SpaceConfig | None = None) -> DensityBoundReport:
    """Bounded Wasserstein bound between the estimator under the process and under its Poisson counterpart.

    ``nu`` is ``nu(J_T)``; when omitted the upper bound ``kappa |J_T|`` is used,
    which only enlarges ``delta_T(M)`` as long as ``M >= nu``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    d1 = kernel.d1_dims
    if nu is None:
        if space is None:
            raise ValueError("need either nu or the space to bound it")
        nu = certificate.kappa * _window_volume(space.dim, T, w)
    d2_dims = (space.d2_dims if space is not None else None)
    if d2_dims is None:
        raise ValueError("space is required to read D2")
    flags = []
    if M < 3 * nu:
        flags.append("M_below_3nu")
    l = kernel.lipschitz_l
    first = (l * w * M / (2.0 ** d2_dims * T) + 1.0) * d2_bound
    tail = 2.0 ** d1 * l * delta_T(M, certificate.kappa, nu)
    return DensityBoundReport(first + tail, {"coupling": first, "count_tail": tail, "delta_T": delta_T(M, certificate.kappa, nu)}, tuple(flags))


def bound_thm_3C(dbw_part: float, kernel: KernelSpec, certificate: ConditionCertificate, density: DensitySpec,
                 T: float, w: float, space: SpaceConfig) -> DensityBoundReport:
    """Bound on the bounded Wasserstein distance from the estimator to the point mass at ``p(0)``.

    Adds the Poisson standard deviation bound and the leading bias term.
    The Taylor remainder is not quantified; it vanishes for quadratic
    densities with a symmetric kernel, otherwise the report carries the flag
    ``remainder_unquantified``.
    """
    if not density.smooth2:
        raise ValueError("the density must be twice continuously differentiable")
    if not kernel.symmetric:
        raise ValueError("the bias constant is only available for symmetric kernels")
    d1 = kernel.d1_dims
    sd = math.sqrt(certificate.kappa / 2.0 ** space.d2_dims) * kernel.l2_norm * math.sqrt(w / T)
    Lp = abs(0.5 * density.laplacian_at_zero(d1) * kernel.second_moment)
    bias = Lp / w ** (2.0 / d1)
    flags = () if density.form.value in ("constant", "separable_quadratic") else ("remainder_unquantified",)
    return DensityBoundReport(dbw_part + sd + bias, {"dbw_part": dbw_part, "sd": sd, "bias": bias, "L_prime": Lp}, flags)


@dataclass(frozen=True)
class DensityExperiment:
    mean: float
    sd: float
    dbw_to_truth: float
    p0: float
    exact_mean: float | None
    replicates: int
    estimates: np.ndarray = field(repr=False, compare=False, default=None)


def _p0(model: ProcessModel) -> float:
    var = model.variant
    if isinstance(var, HomogeneousPoisson):
        return var.ell
    if isinstance(var, InhomogeneousPoisson):
        return var.density.value_at_zero(model.space.d1_dims)
    if isinstance(var, ClusterBounded):
        return var.intensity
    if isinstance(var, MarkovModulated):
        return var.mean_rate
    raise ValueError(f"unsupported model {type(var).__name__}")


def _exact_mean(model: ProcessModel, kernel: KernelSpec, w: float) -> float | None:
    """Campbell mean ``int K(s) p(s w^{-1/D1}) ds`` for Poisson variants."""
    var = model.variant
    d1 = kernel.d1_dims
    if isinstance(var, HomogeneousPoisson):
        return var.ell
    if isinstance(var, InhomogeneousPoisson):
        if var.density.form.value == "separable_quadratic" and kernel.symmetric:
            return var.density.a + var.density.b * d1 * kernel.second_moment * w ** (-2.0 / d1)
        scale = w ** (-1.0 / d1)
        return _integrate(lambda s: kernel(s) * var.density.evaluate(s * scale), d1)
    return None


def mc_density_experiment(model: ProcessModel, kernel: KernelSpec, T: float, w: float, replicates: int, seed) -> DensityExperiment:
    """Simulate the estimator and compare it with ``p(0)``."""
    if replicates < 1000:
        raise ValueError("replicates must be at least 1000")
    window = window_JT(model.space, w, T)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    seeds = ss.spawn(replicates)
    est = np.array([estimate_density_at_zero(sample(model, window, s), kernel, T, w) for s in seeds])
    p0 = _p0(model)
    return DensityExperiment(
        mean=float(est.mean()),
        sd=float(est.std(ddof=1)),
        dbw_to_truth=empirical_dbw(est, [p0]),
        p0=p0,
        exact_mean=_exact_mean(model, kernel, w),
        replicates=replicates,
        estimates=est,
    )
