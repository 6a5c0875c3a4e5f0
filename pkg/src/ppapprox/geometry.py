"""Coordinate transformations, observation windows and the cuboid grid.

Points live in ``R^D = R^{D1} x R^{D2}``.  The first ``D1`` coordinates (the
"data" directions) are stretched by ``w(T)^{1/D1}``, the last ``D2``
coordinates (the "ascertainment" directions) are compressed by
``T^{1/D2}``.  The pre-image of the unit cube ``J = [-1, 1]^D`` under this
map is the window ``J_T``, which is cut into the grid of cuboids used by the
discretization bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

__all__ = [
    "Mu2Kind",
    "SpaceConfig",
    "StretchSchedule",
    "Box",
    "GridSpec",
    "apply_transform",
    "invert_transform",
    "unit_cube",
    "window_JT",
    "window_J_tilde",
    "build_grid",
    "cell_of",
]


class Mu2Kind(str, Enum):
    LEBESGUE = "lebesgue"
    COUNTING = "counting"


@dataclass(frozen=True)
class SpaceConfig:
    """Dimensions of the two coordinate blocks and the reference measure in the second."""

    d1_dims: int
    d2_dims: int
    mu2_kind: Mu2Kind = Mu2Kind.LEBESGUE

    def __post_init__(self):
        if int(self.d1_dims) != self.d1_dims or self.d1_dims < 1:
            raise ValueError(f"d1_dims must be a positive integer, got {self.d1_dims!r}")
        if int(self.d2_dims) != self.d2_dims or self.d2_dims < 1:
            raise ValueError(f"d2_dims must be a positive integer, got {self.d2_dims!r}")
        object.__setattr__(self, "mu2_kind", Mu2Kind(self.mu2_kind))

    @property
    def dim(self) -> int:
        return self.d1_dims + self.d2_dims

    @property
    def counting(self) -> bool:
        return self.mu2_kind is Mu2Kind.COUNTING

    def lattice_side(self, T: float) -> int:
        """``n`` with ``T = n^{D2}``; raises if ``T`` is not admissible for counting measure."""
        n = round(T ** (1.0 / self.d2_dims))
        if n < 1 or not math.isclose(n ** self.d2_dims, T, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(
                f"T={T!r} is not of the form n**{self.d2_dims}, required when mu2 is counting measure"
            )
        return n

    def check_T(self, T: float) -> None:
        if not math.isfinite(T) or T < 1:
            raise ValueError(f"T must be a finite real >= 1, got {T!r}")
        if self.counting:
            self.lattice_side(T)


@dataclass(frozen=True)
class StretchSchedule:
    """Power-law stretch ``w(T) = k * T**delta`` with ``k > 0`` and ``0 < delta <= 1``."""

    k: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be positive, got {self.k!r}")
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta!r}")

    def __call__(self, T):
        return self.k * np.power(T, self.delta) if isinstance(T, np.ndarray) else self.k * T ** self.delta

    def check_on(self, Ts) -> None:
        """Verify ``w(T) >= 1`` and ``w(T) <= k*T`` on a grid of T values."""
        Ts = np.asarray(Ts, dtype=float)
        ws = self(Ts)
        if np.any(ws < 1):
            bad = Ts[ws < 1][0]
            raise ValueError(f"w(T) < 1 at T={bad!r}; pick k so that k*T**delta >= 1 on the grid")
        if np.any(ws > self.k * Ts * (1 + 1e-12)):
            raise ValueError("w(T) exceeds k*T on the grid")


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        if not all(math.isfinite(x) for x in lo + hi):
            raise ValueError("box corners must be finite")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lower={lo} upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def inflate(self, r: float) -> "Box":
        return Box(tuple(x - r for x in self.lower), tuple(x + r for x in self.upper))

    def split(self, d1: int) -> tuple["Box", "Box"]:
        """The D1 and D2 factor boxes."""
        return (
            Box(self.lower[:d1], self.upper[:d1]),
            Box(self.lower[d1:], self.upper[d1:]),
        )


def _as_points(point, dim):
    arr = np.asarray(point, dtype=float)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    return arr


def _scales(space: SpaceConfig, w_of_T: float, T: float) -> np.ndarray:
    if not (w_of_T >= 1 and T >= 1):
        raise ValueError(f"need T >= 1 and w(T) >= 1, got T={T!r}, w={w_of_T!r}")
    return np.concatenate(
        [
            np.full(space.d1_dims, w_of_T ** (1.0 / space.d1_dims)),
            np.full(space.d2_dims, T ** (-1.0 / space.d2_dims)),
        ]
    )


def apply_transform(space: SpaceConfig, w_of_T: float, T: float, point):
    """Map ``(s, t)`` to ``(w^{1/D1} s, T^{-1/D2} t)``; accepts one point or an ``(n, D)`` array.

    With ``w_of_T = T`` this is the volume preserving variant.
    """
    pts = _as_points(point, space.dim)
    return pts * _scales(space, w_of_T, T)


def invert_transform(space: SpaceConfig, w_of_T: float, T: float, point):
    pts = _as_points(point, space.dim)
    return pts / _scales(space, w_of_T, T)


def unit_cube(space: SpaceConfig) -> Box:
    """The image-space window ``J = [-1, 1]^D``."""
    return Box((-1.0,) * space.dim, (1.0,) * space.dim)


def window_JT(space: SpaceConfig, w_of_T: float, T: float) -> Box:
    """Pre-image ``J_T`` of the unit cube."""
    s = w_of_T ** (-1.0 / space.d1_dims)
    t = T ** (1.0 / space.d2_dims)
    return Box((-s,) * space.d1_dims + (-t,) * space.d2_dims, (s,) * space.d1_dims + (t,) * space.d2_dims)


def window_J_tilde(space: SpaceConfig, w_of_T: float, T: float) -> Box:
    """Image of ``J_T`` under the volume preserving map (the enlarged cube)."""
    s = (T / w_of_T) ** (1.0 / space.d1_dims)
    return Box((-s,) * space.d1_dims + (-1.0,) * space.d2_dims, (s,) * space.d1_dims + (1.0,) * space.d2_dims)


@dataclass(frozen=True)
class GridSpec:
    """Cuboid grid on ``J_T``.

    Cell ``(k, l)`` with ``k`` in ``{0..2 n1 + 1}^{D1}`` and ``l`` in
    ``{0..2 n2 + 1}^{D2}`` is the half-open box with D1-width
    ``(w h)^{-1/D1}`` and D2-length 1, intersected with ``J_T``.  Cells
    touching the upper face of ``J_T`` are closed there.
    """

    space: SpaceConfig
    T: float
    h: float
    w_of_T: float
    n1: int
    n2: int

    @property
    def width_s(self) -> float:
        return (self.w_of_T * self.h) ** (-1.0 / self.space.d1_dims)

    @property
    def half_s(self) -> float:
        return self.w_of_T ** (-1.0 / self.space.d1_dims)

    @property
    def half_t(self) -> float:
        return self.T ** (1.0 / self.space.d2_dims)

    @property
    def shape(self) -> tuple:
        return (2 * self.n1 + 2,) * self.space.d1_dims + (2 * self.n2 + 2,) * self.space.d2_dims

    @property
    def n_cells(self) -> int:
        return (2 * self.n1 + 2) ** self.space.d1_dims * (2 * self.n2 + 2) ** self.space.d2_dims

    @property
    def window(self) -> Box:
        return window_JT(self.space, self.w_of_T, self.T)

    def _edges(self):
        d1 = self.space.d1_dims
        c = self.width_s
        ks = np.arange(2 * self.n1 + 2)
        s_lo = np.maximum((ks - self.n1 - 1) * c, -self.half_s)
        s_hi = np.minimum((ks - self.n1) * c, self.half_s)
        ls = np.arange(2 * self.n2 + 2)
        t_lo = np.maximum(ls - self.n2 - 1.0, -self.half_t)
        t_hi = np.minimum(ls - self.n2 + 0.0, self.half_t)
        return d1, s_lo, s_hi, t_lo, t_hi

    def cell_box(self, index) -> Box:
        """Clipped cuboid ``C_kl`` for a multi-index ``(k_1..k_D1, l_1..l_D2)``."""
        index = tuple(int(i) for i in index)
        if len(index) != self.space.dim or any(i < 0 or i >= n for i, n in zip(index, self.shape)):
            raise IndexError(f"cell index {index} outside grid of shape {self.shape}")
        d1, s_lo, s_hi, t_lo, t_hi = self._edges()
        lo = [s_lo[i] for i in index[:d1]] + [t_lo[i] for i in index[d1:]]
        hi = [s_hi[i] for i in index[:d1]] + [t_hi[i] for i in index[d1:]]
        return Box(lo, hi)

    def cell_boxes(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of every cell, ``(n_cells, D)`` each, in C order of the multi-index."""
        d1, s_lo, s_hi, t_lo, t_hi = self._edges()
        axes_lo = [s_lo] * d1 + [t_lo] * self.space.d2_dims
        axes_hi = [s_hi] * d1 + [t_hi] * self.space.d2_dims
        lo = np.stack(np.meshgrid(*axes_lo, indexing="ij"), axis=-1).reshape(-1, self.space.dim)
        hi = np.stack(np.meshgrid(*axes_hi, indexing="ij"), axis=-1).reshape(-1, self.space.dim)
        return lo, hi

    def cell_volumes(self) -> np.ndarray:
        """mu-volume of every cell (counting measure counts one lattice site per unit D2 cell)."""
        lo, hi = self.cell_boxes()
        d1 = self.space.d1_dims
        vol = np.prod(hi[:, :d1] - lo[:, :d1], axis=1)
        if not self.space.counting:
            vol = vol * np.prod(hi[:, d1:] - lo[:, d1:], axis=1)
        return vol

    def cell_centers(self) -> np.ndarray:
        lo, hi = self.cell_boxes()
        return 0.5 * (lo + hi)

    def image_cell_box(self, index, volume_preserving: bool = False) -> Box:
        """``R_kl``, the image of ``C_kl``; with ``volume_preserving`` the image under the map with stretch T."""
        box = self.cell_box(index)
        w = self.T if volume_preserving else self.w_of_T
        lo = apply_transform(self.space, w, self.T, box.lower)
        hi = apply_transform(self.space, w, self.T, box.upper)
        return Box(tuple(lo), tuple(hi))

    def image_diameter_bound(self) -> float:
        d1, d2 = self.space.d1_dims, self.space.d2_dims
        return math.sqrt(d1 * self.h ** (-2.0 / d1) + d2 * self.T ** (-2.0 / d2))

    def iter_indices(self) -> Iterator[tuple]:
        return np.ndindex(*self.shape)

    def flat_index(self, multi) -> np.ndarray:
        return np.ravel_multi_index(np.asarray(multi).T, self.shape)

    def cell_of(self, points) -> np.ndarray:
        return cell_of(self, points)


def build_grid(space: SpaceConfig, schedule: StretchSchedule | float, T: float, h: float) -> GridSpec:
    """Grid with ``n1 = ceil(h^{1/D1}) - 1`` and ``n2 = ceil(T^{1/D2}) - 1``.

    ``schedule`` may be a :class:`StretchSchedule` or an already evaluated ``w(T)``.
    """
    space.check_T(T)
    if not (math.isfinite(h) and h >= 1):
        raise ValueError(f"h must be a finite real >= 1, got {h!r}")
    w = float(schedule(T)) if callable(schedule) else float(schedule)
    if w < 1:
        raise ValueError(f"w(T) must be >= 1, got {w!r}")
    n1 = _ceil_root(h, space.d1_dims) - 1
    if space.counting:
        n2 = space.lattice_side(T) - 1
    else:
        n2 = _ceil_root(T, space.d2_dims) - 1
    return GridSpec(space=space, T=float(T), h=float(h), w_of_T=w, n1=n1, n2=n2)


def _ceil_root(x: float, d: int) -> int:
    """``ceil(x**(1/d))`` robust to floating point noise at perfect powers."""
    r = x ** (1.0 / d)
    n = round(r)
    if n >= 1 and math.isclose(n ** d, x, rel_tol=1e-12):
        return n
    return math.ceil(r)


def cell_of(grid: GridSpec, points) -> np.ndarray:
    """Multi-indices ``(n, D)`` of the cells containing each point of ``J_T``.

    A single point gives a 1-d index tuple array of length D.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != grid.space.dim:
        raise ValueError(f"expected points of dimension {grid.space.dim}, got {pts.shape[1]}")
    if not np.all(grid.window.contains(pts)):
        raise ValueError("point outside J_T")
    d1 = grid.space.d1_dims
    k = np.floor(pts[:, :d1] / grid.width_s + grid.n1 + 1).astype(np.int64)
    l = np.floor(pts[:, d1:] + grid.n2 + 1).astype(np.int64)
    k = np.clip(k, 0, 2 * grid.n1 + 1)
    l = np.clip(l, 0, 2 * grid.n2 + 1)
    idx = np.concatenate([k, l], axis=1)
    return idx[0] if single else idx
