"""Test of the Poisson null against long range clustering.

The statistic is the average nearest neighbour distance ``U`` of the
pattern mapped to the unit cube, ``U~(rho) = U(rho theta_T^{-1} |_J)``.
Small values indicate aggregation.  The critical value is calibrated on a
smoothed indicator so that a ``d2`` bound ``epsilon`` between the process
and its Poisson counterpart translates into a guarantee on the size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import SpaceConfig, apply_transform, unit_cube, window_JT
from .metrics import PointPattern
from .models import HomogeneousPoisson, ProcessModel, sample

__all__ = [
    "KISSING_NUMBERS",
    "default_lipschitz_LD",
    "InfeasibleTestError",
    "TestConfig",
    "nn_statistic",
    "smooth_indicator",
    "transformed_statistic",
    "simulate_statistics",
    "Calibration",
    "calibrate_critical_value",
    "solve_critical_value",
    "size_deficit_bound",
    "TestResult",
    "run_test",
    "rejection_rate",
]

KISSING_NUMBERS = {1: 2, 2: 6, 3: 12, 4: 24, 5: 40, 6: 72, 7: 126, 8: 240}


def default_lipschitz_LD(dim: int) -> float:
    """``1 + 2 kappa_D``: each nearest neighbour relation of either pattern may be used once per point.

    A point is the nearest neighbour of at most ``kappa_D`` other points of
    its own pattern, and the perturbation bound for ``NN_i`` may charge a
    neighbour taken from either of the two patterns.
    """
    if dim not in KISSING_NUMBERS:
        raise ValueError(f"no kissing number stored for dimension {dim}")
    return 1.0 + 2.0 * KISSING_NUMBERS[dim]


class InfeasibleTestError(ValueError):
    """The calibration equation has no solution for this configuration."""


@dataclass(frozen=True)
class TestConfig:
    """Parameters of the calibrated test.

    ``smooth_slope`` is the slope of the smoothed indicator ramp and
    ``lipschitz_LD`` the Lipschitz constant of ``U`` with respect to ``d1``
    (``None`` selects :func:`default_lipschitz_LD`).
    """

    __test__ = False  # not a pytest class

    space: SpaceConfig
    alpha: float
    smooth_slope: float
    epsilon: float
    null_ell: float
    T: float
    w: float
    replicates: int
    seed: int
    lipschitz_LD: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.smooth_slope > 0:
            raise ValueError("smooth_slope must be > 0")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not self.null_ell > 0:
            raise ValueError("null_ell must be > 0")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.lipschitz_LD is None:
            object.__setattr__(self, "lipschitz_LD", default_lipschitz_LD(self.space.dim))
        if not self.lipschitz_LD > 0:
            raise ValueError("lipschitz_LD must be > 0")

    @property
    def target(self) -> float:
        return self.alpha - self.smooth_slope * self.lipschitz_LD * self.epsilon

    @property
    def feasible(self) -> bool:
        return self.target > 0


def nn_statistic(pattern) -> float:
    """Average capped nearest neighbour distance; 1 for patterns with at most one point."""
    pts = pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(np.asarray(pattern, dtype=float))
    if pts.shape[0] <= 1:
        return 1.0
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(np.minimum(dist[:, 1], 1.0).mean())


def smooth_indicator(t, slope: float, x):
    """Ramp equal to 1 left of ``t``, 0 right of ``t + 1/slope``, linear in between."""
    if not slope > 0:
        raise ValueError("slope must be > 0")
    out = np.clip(1.0 - slope * (np.asarray(x, dtype=float) - t), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def transformed_statistic(pattern: PointPattern, space: SpaceConfig, T: float, w: float) -> float:
    """``U`` of the pattern mapped by ``theta_T`` and restricted to the unit cube."""
    if len(pattern) == 0:
        return 1.0
    image = PointPattern(apply_transform(space, w, T, pattern.points), space.dim)
    return nn_statistic(image.restrict(unit_cube(space)))


def _null_model(config: TestConfig) -> ProcessModel:
    return ProcessModel(HomogeneousPoisson(config.null_ell), config.space)


def simulate_statistics(model: ProcessModel, T: float, w: float, replicates: int, seed) -> np.ndarray:
    """``U~`` for ``replicates`` independent patterns of ``model`` on ``J_T``."""
    window = window_JT(model.space, w, T)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.array(
        [transformed_statistic(sample(model, window, child), model.space, T, w) for child in ss.spawn(replicates)]
    )


def _smoothed_mean(u: np.ndarray, t: float, slope: float) -> float:
    return float(np.clip(1.0 - slope * (u - t), 0.0, 1.0).mean())


def solve_critical_value(u, slope: float, target: float, tol: float = 1e-9) -> float:
    """Solve ``mean f_{t,slope}(u) = target`` for ``t`` by bisection.

    The left side is continuous and nondecreasing in ``t``; it equals 0 for
    ``t <= min(u) - 1/slope`` and 1 for ``t >= max(u)``.
    """
    u = np.asarray(u, dtype=float).ravel()
    if not 0 < target < 1:
        raise InfeasibleTestError(f"calibration target {target!r} lies outside (0, 1)")
    lo, hi = float(u.min()) - 1.0 / slope, float(u.max())
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _smoothed_mean(u, mid, slope) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class Calibration:
    t_alpha: float
    target: float
    samples: np.ndarray = field(repr=False)


def calibrate_critical_value(config: TestConfig) -> Calibration:
    """Simulate the null and solve the calibration equation.

    The same null sample is used for every bisection step, so the solved
    equation is deterministic.
    """
    if not config.feasible:
        raise InfeasibleTestError(
            f"alpha - slope * L_D * epsilon = {config.target:.6g} <= 0; the calibration equation has no solution"
        )
    u = simulate_statistics(_null_model(config), config.T, config.w, config.replicates, config.seed)
    return Calibration(solve_critical_value(u, config.smooth_slope, config.target), config.target, u)


def size_deficit_bound(config: TestConfig, calibration: Calibration) -> float:
    """``E f_t(U~) - E f_{t - 1/slope}(U~) + 2 slope L_D epsilon`` on the calibration sample."""
    k = config.smooth_slope
    t = calibration.t_alpha
    u = calibration.samples
    return float(
        _smoothed_mean(u, t, k) - _smoothed_mean(u, t - 1.0 / k, k) + 2.0 * k * config.lipschitz_LD * config.epsilon
    )


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    t_alpha: float
    reject: bool
    size_deficit_bound: float


def run_test(config: TestConfig, observed: PointPattern, calibration: Calibration | None = None,
             transformed: bool = False) -> TestResult:
    """Apply the calibrated test to ``observed``.

    ``observed`` lies in ``J_T`` coordinates unless ``transformed`` is set, in
    which case it is already in the unit cube.  The size deficit bound
    ``E f_t(U~) - E f_{t - 1/slope}(U~) + 2 slope L_D epsilon`` is evaluated on
    the calibration sample.
    """
    cal = calibration if calibration is not None else calibrate_critical_value(config)
    if transformed:
        stat = nn_statistic(observed.restrict(unit_cube(config.space)))
    else:
        stat = transformed_statistic(observed, config.space, config.T, config.w)
    deficit = size_deficit_bound(config, cal)
    return TestResult(stat, cal.t_alpha, bool(stat < cal.t_alpha), float(deficit))


def rejection_rate(config: TestConfig, calibration: Calibration, model: ProcessModel, replicates: int, seed) -> tuple[float, float]:
    """Monte Carlo rejection rate of the calibrated test under ``model`` and its standard error."""
    u = simulate_statistics(model, config.T, config.w, replicates, seed)
    rate = float(np.mean(u < calibration.t_alpha))
    return rate, math.sqrt(max(rate * (1 - rate), 1e-300) / replicates)
