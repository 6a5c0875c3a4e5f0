"""Explicit upper bounds on the distance to the Poisson process.

Each bound is a sum of labelled terms evaluated from a
:class:`~ppapprox.models.ConditionCertificate`.  Term labels are stable:

``discretization_d1``, ``discretization_d2_dir``
    placing points at cell centres in the data / ascertainment directions;
``strong_neighborhood``
    the ``p^2 + p E Z`` part of the Stein sum;
``orderliness_cells``
    cells holding two or more points;
``orderliness_sections``
    the ``E(I Z)`` part, controlled section by section;
``mixing``
    dependence on far away cells (``mixing_orderliness`` is the extra
    beta-mixing term);
``poisson_shift``
    moving from ``Po(lambda)`` to ``Po(nu(J_T))`` in the count bound;
``regularity``
    replacing the density by its value at the origin.

All functions are written with numpy broadcasting so that ``h`` and ``m``
may be arrays; :class:`BoundReport` holds scalar results.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .geometry import SpaceConfig, StretchSchedule, build_grid
from .models import ConditionCertificate, MixingKind, unit_ball_volume

__all__ = [
    "Theorem",
    "BoundInputs",
    "BoundReport",
    "log_up",
    "lemma_2F_gap",
    "epsilon_T",
    "L_T",
    "lambda_lower",
    "bound_2_10",
    "bound_2_11",
    "bound_thm_2D",
    "bound_thm_2G",
    "bound_thm_2I",
    "bound_thm_2K",
    "evaluate_bound",
    "term_table",
    "optimize_parameters",
    "ConvergenceResult",
    "convergence_check",
    "rate_exponent",
]


class Theorem(str, Enum):
    D2_RHO_210 = "d2_rho_210"
    D2_RHO_211 = "d2_rho_211"
    D2_BETA = "d2_beta"
    D2_PHI = "d2_phi"
    DTV_COUNTS = "dtv_counts"
    D2_TILDE = "d2_tilde"
    D2_FIXED_LIMIT = "d2_fixed_limit"


REQUIRED_KIND = {
    Theorem.D2_RHO_210: MixingKind.RHO,
    Theorem.D2_RHO_211: MixingKind.RHO,
    Theorem.D2_BETA: MixingKind.BETA,
    Theorem.D2_PHI: MixingKind.PHI,
    Theorem.DTV_COUNTS: MixingKind.RHO,
    Theorem.D2_TILDE: MixingKind.RHO,
    Theorem.D2_FIXED_LIMIT: MixingKind.RHO,
}


@dataclass(frozen=True)
class BoundInputs:
    """Everything one bound evaluation needs.

    ``rough`` selects the simpler-looking form of the d2 bound (the one with
    ``log_up`` factors and no ``min(1, .)`` damping) as the base for the
    derived theorems; it is implied by ``d2_rho_211``.
    """

    space: SpaceConfig
    schedule: StretchSchedule
    T: float
    h: float
    m: int
    certificate: ConditionCertificate
    theorem: Theorem
    extra: tuple | None = None
    rough: bool = False

    def __post_init__(self):
        object.__setattr__(self, "theorem", Theorem(self.theorem))
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"m must be a nonnegative integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        build_grid(self.space, self.schedule, self.T, self.h)

    @property
    def w(self) -> float:
        return float(self.schedule(self.T))


@dataclass(frozen=True, eq=False)
class BoundReport:
    theorem: Theorem
    terms: tuple
    total: float
    auxiliaries: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def clamped(self) -> float:
        return min(self.total, 1.0)

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.terms)

    def term(self, label: str) -> float:
        for lab, val in self.terms:
            if lab == label:
                return val
        raise KeyError(label)

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem.value,
            "terms": dict(self.terms),
            "total": self.total,
            "clamped": self.clamped,
            "auxiliaries": dict(self.auxiliaries),
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# scalar helpers


def log_up(x: float) -> float:
    """``1 + max(log x, 0)``."""
    if not x > 0:
        raise ValueError(f"log_up needs x > 0, got {x!r}")
    return 1.0 + max(math.log(x), 0.0)


def _log_up_arr(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 + np.maximum(np.log(np.where(x > 0, x, 1.0)), 0.0)


def _log_plus_arr(x):
    return _log_up_arr(x) - 1.0


def lemma_2F_gap(certificate: ConditionCertificate, space: SpaceConfig, w_of_T: float, h):
    """Upper bound on ``nu(C) - P[xi(C) >= 1]`` for a single grid cell."""
    wh = w_of_T * np.asarray(h, dtype=float)
    if np.any(wh < 1):
        raise ValueError("need w(T) h >= 1")
    d2 = space.d2_dims
    out = 2.0 ** (d2 - 2) / wh * certificate.alpha_check(2.0 ** d2 / wh)
    return float(out) if np.ndim(out) == 0 else out


def _eps(cert, space, w, h):
    D, d2 = space.dim, space.d2_dims
    wh = w * np.asarray(h, dtype=float)
    if cert.iota <= 0:
        return np.full(np.shape(wh), np.inf)
    bracket = 1.0 - 2.0 ** (D + d2 - 2) * cert.alpha_check(2.0 ** d2 / wh) / cert.iota
    with np.errstate(divide="ignore"):
        return np.where(bracket > 0, 1.0 / np.where(bracket > 0, bracket, 1.0) - 1.0, np.inf)


def epsilon_T(certificate: ConditionCertificate, space: SpaceConfig, w_of_T: float, h):
    """Relative slack in the lower bound on ``lambda``; ``inf`` when that bound is not positive."""
    if certificate.iota <= 0:
        raise ValueError("epsilon_T needs iota > 0")
    out = _eps(certificate, space, w_of_T, h)
    return float(out) if np.ndim(out) == 0 else out


def L_T(certificate: ConditionCertificate, space: SpaceConfig, T: float, w_of_T: float, h):
    """The damping factor of the strong-neighbourhood and section terms (1 when ``epsilon`` is infinite)."""
    out = _L(certificate, space, T, w_of_T, _eps(certificate, space, w_of_T, h))
    return float(out) if np.ndim(out) == 0 else out


def _L(cert, space, T, w, eps):
    D = space.dim
    if cert.iota <= 0:
        return np.ones(np.shape(eps))
    logs = 1.0 + 2.0 * _log_plus_arr(2.0 ** (D - 1) * cert.kappa * T / w)
    finite = np.isfinite(eps)
    val = 2.0 * (1.0 + np.where(finite, eps, 0.0)) * w / (2.0 ** D * cert.iota * T) * logs
    return np.where(finite, np.minimum(1.0, val), 1.0)


def lambda_lower(certificate: ConditionCertificate, space: SpaceConfig, T: float, w_of_T: float, h):
    """Lower bound on ``lambda = sum_C P[xi(C) >= 1]``."""
    D, d2 = space.dim, space.d2_dims
    wh = w_of_T * np.asarray(h, dtype=float)
    val = 2.0 ** D * (T / w_of_T) * (certificate.iota - 2.0 ** (D + d2 - 2) * certificate.alpha_check(2.0 ** d2 / wh))
    out = np.maximum(val, 0.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# term tables


def _n2(space: SpaceConfig, T: float) -> int:
    if space.counting:
        return space.lattice_side(T) - 1
    r = T ** (1.0 / space.d2_dims)
    n = round(r)
    if n >= 1 and math.isclose(n ** space.d2_dims, T, rel_tol=1e-12):
        return n - 1
    return math.ceil(r) - 1


def _discretization(space, T, w, h, tilde):
    d1, d2 = space.d1_dims, space.d2_dims
    t1 = math.sqrt(d1) / np.asarray(h, dtype=float) ** (1.0 / d1)
    if tilde:
        t1 = t1 * (T / w) ** (1.0 / d1)
    return {"discretization_d1": t1, "discretization_d2_dir": math.sqrt(d2) / T ** (1.0 / d2)}


def term_table(inputs: BoundInputs, m=None, h=None) -> dict:
    """Term values for the selected theorem, broadcasting over arrays ``m`` and ``h``.

    Returns a dict of label to array (plus ``_eps``, ``_L`` and ``_lambda_lower``
    auxiliaries prefixed with an underscore).
    """
    space, cert, T, w = inputs.space, inputs.certificate, float(inputs.T), inputs.w
    thm = inputs.theorem
    kind = REQUIRED_KIND[thm]
    beta = cert.beta_for(kind)
    alpha = cert.alpha_check
    if thm is Theorem.D2_PHI:
        beta = cert.beta_for(MixingKind.PHI)
    elif thm is Theorem.D2_BETA:
        beta = cert.beta_for(MixingKind.BETA)
    m = np.asarray(inputs.m if m is None else m, dtype=float)
    h = np.asarray(inputs.h if h is None else h, dtype=float)
    m, h = np.broadcast_arrays(m, h)
    d1, d2, D = space.d1_dims, space.d2_dims, space.dim
    kappa, iota = cert.kappa, cert.iota
    n2 = _n2(space, T)
    m_eff = np.minimum(m, 2 * n2 + 1)
    weak_empty = m >= 2 * n2 + 1
    eps = _eps(cert, space, w, h)
    finite = np.isfinite(eps)
    one_eps = np.where(finite, 1.0 + np.where(finite, eps, 0.0), np.inf)
    rough = inputs.rough or thm is Theorem.D2_RHO_211
    tilde = thm in (Theorem.D2_TILDE, Theorem.D2_FIXED_LIMIT)
    lam_lo = lambda_lower(cert, space, T, w, h)
    lam_lo = np.asarray(lam_lo) * np.ones_like(h)

    cells = 2.0 ** (2 * D + d2 - 1) * (T / w) * alpha(2.0 ** d2 / (w * h))
    section_alpha = alpha(2.0 ** D * (2 * m_eff + 1) ** d2 / w)
    beta_m = np.where(weak_empty, 0.0, beta(m))
    out: dict = {}

    if thm is Theorem.DTV_COUNTS:
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = np.where(lam_lo > 0, np.minimum(1.0, 1.0 / np.where(lam_lo > 0, lam_lo, 1.0)), 1.0)
            g2 = np.where(lam_lo > 0, np.minimum(1.0, 1.0 / np.sqrt(np.where(lam_lo > 0, lam_lo, 1.0))), 1.0)
        half_cells = 0.5 * cells
        shift = (min(1.0, math.sqrt(w / (2.0 ** D * iota * T))) if iota > 0 else 1.0) * half_cells
        out["strong_neighborhood"] = g1 * 2.0 ** (2 * D + 2 * d1) * kappa ** 2 * T * (2 * m_eff + 1) ** d2 / w ** 2
        out["orderliness_cells"] = half_cells
        out["poisson_shift"] = shift * np.ones_like(h)
        out["orderliness_sections"] = g1 * 2.0 ** (D + d2) * (T ** (1.0 / d2) + m_eff + 1) ** d2 / w * section_alpha
        out["mixing"] = g2 * 2.0 ** (2 * D) * math.sqrt(kappa) * np.sqrt(h / w) * T * beta_m
    else:
        out.update(_discretization(space, T, w, h, tilde))
        out["discretization_d2_dir"] = out["discretization_d2_dir"] * np.ones_like(h)
        if rough:
            if iota > 0:
                logs = _log_up_arr(2.0 ** (D - 1) * kappa * T / w)
                with np.errstate(invalid="ignore"):
                    out["strong_neighborhood"] = (
                        2.0 ** (D + 2 * d1 + 2) * kappa ** 2 / iota * one_eps * logs * (2 * m_eff + 1) ** d2 / w
                    )
                    out["orderliness_cells"] = cells
                    out["orderliness_sections"] = 2.0 ** (d2 + 2) * 5.0 ** d2 / iota * one_eps * logs * section_alpha
                factor = 2.0 * np.sqrt(one_eps) * math.sqrt(w / (2.0 ** D * iota * T)) if iota > 0 else np.inf
            else:
                out["strong_neighborhood"] = np.full(h.shape, np.inf)
                out["orderliness_cells"] = cells
                out["orderliness_sections"] = np.full(h.shape, np.inf)
                factor = np.inf
            rho_mixing = 2.0 ** (1.5 * D + 1) * np.sqrt(kappa / iota * one_eps) * np.sqrt(T * h) if iota > 0 else np.inf
        else:
            L = _L(cert, space, T, w, eps)
            out["strong_neighborhood"] = L * 2.0 ** (2 * D + 2 * d1) * kappa ** 2 * T * (2 * m_eff + 1) ** d2 / w ** 2
            out["orderliness_cells"] = cells
            out["orderliness_sections"] = L * 2.0 ** (D + d2) * (T ** (1.0 / d2) + m_eff + 1) ** d2 / w * section_alpha
            if iota > 0:
                factor = np.where(
                    finite, np.minimum(1.0, 1.65 * np.sqrt(np.where(finite, one_eps, 1.0)) * math.sqrt(w / (2.0 ** D * iota * T))), 1.0
                )
            else:
                factor = np.ones_like(h)
            rho_mixing = factor * 2.0 ** (2 * D) * math.sqrt(kappa) * np.sqrt(h / w) * T
        if thm is Theorem.D2_BETA:
            out["mixing"] = _times(factor * 2.0 ** (2 * d2) * T * 2.0, beta_m)
            extra = 2.0 ** (2 * d2) * T * 2.0 ** (D + 1) / w * alpha(2.0 ** D / w)
            out["mixing_orderliness"] = np.where(weak_empty, 0.0, _times(factor, extra))
        elif thm is Theorem.D2_PHI:
            out["mixing"] = _times(factor * 2.0 ** (2 * D + 1) * kappa * T / w, beta_m)
        else:
            out["mixing"] = _times(rho_mixing, beta_m)
        if thm is Theorem.D2_FIXED_LIMIT:
            if inputs.extra is None:
                raise ValueError("the fixed-limit bound needs regularity (L, z)")
            Lreg, z = inputs.extra
            reg = 2.0 ** ((z + d1 + 2 * d2) / 2) * (d1 / (z + d1)) * Lreg * unit_ball_volume(d1) * T / w ** (1 + z / d1)
            out["regularity"] = reg * np.ones_like(h)
    for k in list(out):
        out[k] = np.broadcast_to(np.asarray(out[k], dtype=float), h.shape)
    out["_eps"] = eps
    out["_L"] = _L(cert, space, T, w, eps)
    out["_lambda_lower"] = lam_lo
    return out


def _times(a, b):
    """Product with the convention ``inf * 0 = 0`` (a vanishing mixing coefficient kills the term)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(b == 0, 0.0, a * b)


def _report(inputs: BoundInputs) -> BoundReport:
    cert = inputs.certificate
    kind = REQUIRED_KIND[inputs.theorem]
    cert.beta_for(kind)  # raises on incompatible certificates
    table = term_table(inputs)
    terms = tuple((k, float(v)) for k, v in table.items() if not k.startswith("_"))
    total = float(sum(v for _, v in terms))
    eps = float(table["_eps"])
    D = inputs.space.dim
    T, w = float(inputs.T), inputs.w
    aux = {
        "epsilon": eps,
        "L": float(table["_L"]),
        "lambda_lower": float(table["_lambda_lower"]),
        "nu_T_lower": 2.0 ** D * cert.iota * T / w,
        "nu_T_upper": 2.0 ** D * cert.kappa * T / w,
        "w": w,
        "m_effective": min(inputs.m, 2 * _n2(inputs.space, T) + 1),
    }
    flags = []
    if math.isinf(eps):
        flags.append("epsilon_infinite")
    if math.isinf(total):
        flags.append("infinite_total")
    if inputs.m >= 2 * _n2(inputs.space, T) + 1:
        flags.append("weak_set_empty")
    if inputs.theorem in (Theorem.D2_BETA, Theorem.D2_PHI):
        flags.append("constants_from_proof")
    return BoundReport(inputs.theorem, terms, total, aux, tuple(flags))


def _require(inputs: BoundInputs, allowed) -> None:
    if inputs.theorem not in allowed:
        raise ValueError(f"theorem {inputs.theorem.value!r} is not handled here; expected one of {[a.value for a in allowed]}")


def bound_2_10(inputs: BoundInputs) -> BoundReport:
    _require(inputs, (Theorem.D2_RHO_210,))
    return _report(replace(inputs, rough=False))


def bound_2_11(inputs: BoundInputs) -> BoundReport:
    _require(inputs, (Theorem.D2_RHO_211, Theorem.D2_RHO_210))
    return _report(replace(inputs, theorem=Theorem.D2_RHO_211, rough=True))


def bound_thm_2D(inputs: BoundInputs) -> BoundReport:
    """Beta- or phi-mixing variant; the constants are read off the proof's bounds on ``e``."""
    _require(inputs, (Theorem.D2_BETA, Theorem.D2_PHI))
    return _report(inputs)


def bound_thm_2G(inputs: BoundInputs) -> BoundReport:
    """Total variation bound between the point counts in ``J_T``."""
    _require(inputs, (Theorem.DTV_COUNTS,))
    return _report(inputs)


def bound_thm_2I(inputs: BoundInputs) -> BoundReport:
    """Volume preserving transformation: the data-direction discretization term gains ``(T/w)^{1/D1}``."""
    _require(inputs, (Theorem.D2_TILDE,))
    return _report(inputs)


def bound_thm_2K(inputs: BoundInputs) -> BoundReport:
    """Approximation by a Poisson process with the constant intensity ``p(0)``."""
    _require(inputs, (Theorem.D2_FIXED_LIMIT,))
    if inputs.extra is None:
        raise ValueError("the fixed-limit bound needs regularity (L, z)")
    return _report(inputs)


_DISPATCH = {
    Theorem.D2_RHO_210: bound_2_10,
    Theorem.D2_RHO_211: bound_2_11,
    Theorem.D2_BETA: bound_thm_2D,
    Theorem.D2_PHI: bound_thm_2D,
    Theorem.DTV_COUNTS: bound_thm_2G,
    Theorem.D2_TILDE: bound_thm_2I,
    Theorem.D2_FIXED_LIMIT: bound_thm_2K,
}


def evaluate_bound(inputs: BoundInputs) -> BoundReport:
    return _DISPATCH[inputs.theorem](inputs)


# ---------------------------------------------------------------------------
# parameter search


def optimize_parameters(inputs: BoundInputs, m_grid, h_grid) -> tuple[int, float, BoundReport]:
    """Exhaustive minimisation of the total over ``m_grid x h_grid``.

    Ties go to the smaller ``m``, then the smaller ``h``.
    """
    ms = np.array(sorted({int(x) for x in m_grid}), dtype=float)
    hs = np.array(sorted({float(x) for x in h_grid}), dtype=float)
    if ms.size == 0 or hs.size == 0:
        raise ValueError("parameter grids must be nonempty")
    if np.any(ms < 0) or np.any(hs < 1):
        raise ValueError("need m >= 0 and h >= 1 on the grids")
    cert = inputs.certificate
    cert.beta_for(REQUIRED_KIND[inputs.theorem])
    M, H = np.meshgrid(ms, hs, indexing="ij")
    table = term_table(inputs, M, H)
    total = sum(v for k, v in table.items() if not k.startswith("_"))
    total = np.where(np.isnan(total), np.inf, total)
    flat = int(np.argmin(total.ravel()))  # argmin returns the first minimiser: smallest m, then h
    i, j = np.unravel_index(flat, total.shape)
    m_star, h_star = int(ms[i]), float(hs[j])
    return m_star, h_star, evaluate_bound(replace(inputs, m=m_star, h=h_star))


# ---------------------------------------------------------------------------
# convergence and rates


@dataclass(frozen=True)
class ConvergenceResult:
    holds: bool
    binding: str
    threshold: float
    explanation: str

    def __bool__(self) -> bool:
        return self.holds


def convergence_check(delta: float, r: float, s_plus_1: float, which: str = "cor2B", z: float | None = None, D1: int | None = None) -> ConvergenceResult:
    """Sufficient conditions for the bound to vanish as ``T`` grows.

    ``which`` is ``cor2B`` (the d2 bound), ``cor2J`` (volume preserving map)
    or ``cor2L`` (fixed limit; needs ``z`` and ``D1``).
    """
    if not (0 < delta <= 1) or not r > 0:
        raise ValueError("need 0 < delta <= 1 and r > 0")
    stretch = (1 - delta) / delta * (1 + r) / r
    if which == "cor2B":
        mixing, mixing_name = 1 / delta, "1/delta"
    elif which in ("cor2J", "cor2L"):
        mixing, mixing_name = (2 - delta) / delta, "(2-delta)/delta"
    else:
        raise ValueError(f"unknown check {which!r}")
    if stretch >= mixing:
        binding, thr = "((1-delta)/delta)((1+r)/r)", stretch
    else:
        binding, thr = mixing_name, mixing
    holds = s_plus_1 > thr
    expl = f"need 1+s > {thr:.6g} ({binding}); got {s_plus_1:.6g}"
    if which == "cor2L":
        if z is None or D1 is None:
            raise ValueError("cor2L needs z and D1")
        zthr = (1 - delta) / delta * D1
        if not z > zthr:
            holds = False
            if s_plus_1 > thr:
                binding, thr = "((1-delta)/delta) D1", zthr
            expl += f"; need z > {zthr:.6g}, got {z:.6g}"
        else:
            expl += f"; z > {zthr:.6g} holds"
    return ConvergenceResult(bool(holds), binding, float(thr), expl)


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(10 ** 9)


def rate_exponent(mixing_kind, D1: int, D2: int, alpha_r=1, beta_p=None, delta=1, theorem: str = "d2", z=None, q_cap=64):
    """Exponent ``e`` such that the optimised bound is ``O(T^e)`` up to logarithms.

    Power families are assumed: ``alpha(v) ~ v^r``, ``beta(u) ~ u^{-p}``
    (default ``p = 2 D2``), ``w(T) ~ T^delta``.  With ``m = T^x`` and
    ``h = T^q`` every term is ``T`` to an affine function of ``(x, q)``;
    the minimax of these affine functions over ``0 <= x <= 1/D2``,
    ``0 <= q <= q_cap`` is attained at a vertex, which we find exactly by
    enumerating intersections in rational arithmetic.

    ``theorem`` is one of ``d2``, ``d2_tilde``, ``d2_fixed_limit`` (needs
    ``z``) or ``dtv_counts``.
    """
    kind = MixingKind(mixing_kind)
    r = _as_fraction(alpha_r)
    p = _as_fraction(2 * D2 if beta_p is None else beta_p)
    dl = _as_fraction(delta)
    if r <= 0 or p <= 0:
        raise ValueError("degenerate family: alpha and beta exponents must be positive")
    if not (0 < dl <= 1):
        raise ValueError("delta must lie in (0, 1]")
    d1, d2 = Fraction(D1), Fraction(D2)
    one = Fraction(1)
    # each term: (const, coef_x, coef_q)
    terms = {}
    if theorem != "dtv_counts":
        shift = (one - dl) / d1 if theorem in ("d2_tilde", "d2_fixed_limit") else Fraction(0)
        terms["discretization_d1"] = (shift, Fraction(0), -one / d1)
        terms["discretization_d2_dir"] = (-one / d2, Fraction(0), Fraction(0))
    terms["strong_neighborhood"] = (-dl, d2, Fraction(0))
    terms["orderliness_cells"] = (one - dl - r * dl, Fraction(0), -r)
    terms["orderliness_sections"] = (-r * dl, r * d2, Fraction(0))
    if kind is MixingKind.RHO:
        terms["mixing"] = (one / 2, -p, one / 2)
    elif kind is MixingKind.BETA:
        terms["mixing"] = ((one + dl) / 2, -p, Fraction(0))
        terms["mixing_orderliness"] = ((one - dl) / 2 - r * dl, Fraction(0), Fraction(0))
    else:
        terms["mixing"] = ((one - dl) / 2, -p, Fraction(0))
    if theorem == "d2_fixed_limit":
        if z is None:
            raise ValueError("d2_fixed_limit needs z")
        zf = _as_fraction(z)
        terms["regularity"] = (one - dl - dl * zf / d1, Fraction(0), Fraction(0))
    elif theorem not in ("d2", "d2_tilde", "dtv_counts"):
        raise ValueError(f"unknown theorem family {theorem!r}")

    affine = list(terms.values())
    x_max, q_max = one / d2, Fraction(q_cap)
    lines = [(Fraction(1), Fraction(0), Fraction(0)), (Fraction(1), Fraction(0), -x_max),
             (Fraction(0), Fraction(1), Fraction(0)), (Fraction(0), Fraction(1), -q_max)]
    # a*x + b*q + c = 0
    for (c1, x1, q1), (c2, x2, q2) in itertools.combinations(affine, 2):
        a, b, c = x1 - x2, q1 - q2, c1 - c2
        if a != 0 or b != 0:
            lines.append((a, b, c))
    best = None
    for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(lines, 2):
        det = a1 * b2 - a2 * b1
        if det == 0:
            continue
        x = (-c1 * b2 + c2 * b1) / det
        q = (-a1 * c2 + a2 * c1) / det
        if not (0 <= x <= x_max and 0 <= q <= q_max):
            continue
        val = max(c + cx * x + cq * q for c, cx, cq in affine)
        if best is None or val < best:
            best = val
    return best
