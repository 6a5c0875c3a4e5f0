import math
from dataclasses import replace
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

import oracles
from ppapprox.bounds import (
    BoundInputs,
    L_T,
    bound_2_10,
    bound_2_11,
    bound_thm_2D,
    bound_thm_2G,
    bound_thm_2I,
    bound_thm_2K,
    convergence_check,
    epsilon_T,
    evaluate_bound,
    lambda_lower,
    lemma_2F_gap,
    log_up,
    optimize_parameters,
    rate_exponent,
)
from ppapprox.geometry import SpaceConfig, StretchSchedule, build_grid
from ppapprox.models import ConditionCertificate, FiniteRangeBeta, PowerAlpha, PowerBeta, unit_ball_volume

SPACE = SpaceConfig(1, 1)
IDENTITY = StretchSchedule(1.0, 1.0)
ZERO_RHO = ConditionCertificate(1.0, 1.0, PowerAlpha(0.0), FiniteRangeBeta(0.0, 0.0), "rho")
POWER_RHO = ConditionCertificate(1.0, 1.0, PowerAlpha(1.0), PowerBeta(1.0, 2.0), "rho")


def _inputs(theorem, cert=POWER_RHO, T=256.0, h=256.0, m=4, schedule=IDENTITY, space=SPACE, extra=None):
    return BoundInputs(space, schedule, T, h, m, cert, theorem, extra)


def _mp_alpha(c, r=1):
    return lambda v: c * mp.mpf(v) ** r


def _mp_beta(c, p):
    return lambda u: c * (1 + mp.mpf(u)) ** (-p)


def test_log_up_examples():
    assert log_up(0.5) == 1.0
    assert log_up(1.0) == 1.0
    assert log_up(math.e ** 2) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        log_up(0.0)


def test_cell_gap_examples():
    assert lemma_2F_gap(ZERO_RHO, SPACE, 4.0, 4.0) == 0.0
    assert lemma_2F_gap(POWER_RHO, SPACE, 4.0, 4.0) == pytest.approx(1 / 256)
    with pytest.raises(ValueError):
        lemma_2F_gap(POWER_RHO, SPACE, 0.5, 1.0)


def test_cell_gap_dominates_poisson_cells():
    # for a Poisson cell with mean lam, nu(C) - P[xi(C) >= 1] = lam - (1 - exp(-lam))
    for kappa in (0.5, 1.0, 3.0):
        cert = ConditionCertificate(kappa, kappa, PowerAlpha(2 * kappa ** 2), FiniteRangeBeta(0.0, 0.0), "rho")
        for T, h in ((16.0, 16.0), (64.0, 8.0), (9.0, 1.0)):
            grid = build_grid(SPACE, IDENTITY, T, h)
            lam = kappa * grid.cell_volumes().max()
            assert lam - (1 - math.exp(-lam)) <= lemma_2F_gap(cert, SPACE, T, h)


def test_epsilon_examples():
    assert epsilon_T(ZERO_RHO, SPACE, 8.0, 8.0) == 0.0
    eps = epsilon_T(POWER_RHO, SPACE, 8.0, 8.0)
    want = oracles.epsilon_mp(2, 1, 1, _mp_alpha(1), 64)
    assert eps == pytest.approx(float(want), rel=1e-14)
    assert eps == pytest.approx(1 / 15, rel=1e-14)
    assert math.isinf(epsilon_T(POWER_RHO, SPACE, 1.0, 1.0))
    with pytest.raises(ValueError):
        epsilon_T(ConditionCertificate(1.0, 0.0, PowerAlpha(1.0), PowerBeta(1.0, 2.0), "rho"), SPACE, 8.0, 8.0)


def test_L_and_lambda_lower():
    assert L_T(POWER_RHO, SPACE, 1.0, 1.0, 1.0) == 1.0  # epsilon infinite
    assert 0 < L_T(POWER_RHO, SPACE, 256.0, 4.0, 4.0) <= 1.0
    assert lambda_lower(ZERO_RHO, SPACE, 16.0, 4.0, 4.0) == pytest.approx(16.0)
    assert lambda_lower(POWER_RHO, SPACE, 1.0, 1.0, 1.0) == 0.0


def test_damped_bound_against_extended_precision():
    # frozen: extended-precision total for D1=D2=1, T=w=h=256, m=4, kappa=iota=1,
    # alpha(v)=v, beta(u)=(1+u)^-2
    frozen = 138.57739862633713
    report = bound_2_10(_inputs("d2_rho_210"))
    terms = oracles.bound_210_mp(1, 1, 256, 256, 256, 4, 1, 1, _mp_alpha(1), _mp_beta(1, 2))
    assert report.total == pytest.approx(float(mp.fsum(terms)), rel=1e-10)
    assert report.total == pytest.approx(frozen, rel=1e-10)
    assert [v for _, v in report.terms] == pytest.approx([float(t) for t in terms], rel=1e-10)


def test_damped_bound_random_inputs_match_oracle():
    rng = np.random.default_rng(41)
    for _ in range(40):
        D1, D2 = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        T = float(rng.uniform(2, 500))
        w = float(T ** rng.uniform(0.3, 1))
        h = float(rng.uniform(1, 50))
        m = int(rng.integers(0, 5))
        kappa = float(rng.uniform(0.5, 3))
        iota = float(rng.uniform(0.1, kappa))
        c, r, p = float(rng.uniform(0, 2)), float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 3))
        cert = ConditionCertificate(kappa, iota, PowerAlpha(c, r), PowerBeta(1.0, p), "rho")
        space = SpaceConfig(D1, D2)
        sched = StretchSchedule(w / T, 1.0)
        report = bound_2_10(_inputs("d2_rho_210", cert, T, h, m, sched, space))
        n2 = math.ceil(T ** (1 / D2) - 1e-12) - 1
        beta = _mp_beta(1, p) if m < 2 * n2 + 1 else (lambda u: 0)
        terms = oracles.bound_210_mp(D1, D2, T, report.auxiliaries["w"], h, m, kappa, iota, _mp_alpha(c, r), beta)
        want = float(mp.fsum(terms))
        if math.isfinite(want):
            assert report.total == pytest.approx(want, rel=1e-9)


def test_rough_bound_example():
    # the hand value 4.5 drops the log factor; log_up(2) = 1 + ln 2 gives 1/8 + 4 (1 + ln 2)
    report = bound_2_11(_inputs("d2_rho_211", ZERO_RHO, T=16.0, h=16.0, m=0))
    assert report.total == pytest.approx(0.125 + 4 * (1 + math.log(2)), rel=1e-14)
    assert report.total == pytest.approx(6.897588722239781, rel=1e-12)
    terms = oracles.bound_211_mp(1, 1, 16, 16, 16, 0, 1, 1, _mp_alpha(0), lambda u: 0)
    assert report.total == pytest.approx(float(mp.fsum(terms)), rel=1e-12)


def test_rough_bound_against_extended_precision():
    report = bound_2_11(_inputs("d2_rho_211", T=64.0, h=8.0, m=3))
    terms = oracles.bound_211_mp(1, 1, 64, 64, 8, 3, 1, 1, _mp_alpha(1), _mp_beta(1, 2))
    assert report.total == pytest.approx(float(mp.fsum(terms)), rel=1e-10)


def test_rough_bound_infinite_epsilon_is_flagged():
    cert = ConditionCertificate(1.0, 1.0, PowerAlpha(1e6), PowerBeta(1.0, 2.0), "rho")
    report = bound_2_11(_inputs("d2_rho_211", cert, T=16.0, h=1.0, m=1))
    assert math.isinf(report.total)
    assert "epsilon_infinite" in report.flags and "infinite_total" in report.flags
    assert report.clamped == 1.0


def test_zero_certificate_keeps_only_three_terms():
    report = bound_2_10(_inputs("d2_rho_210", ZERO_RHO))
    nonzero = {label for label, v in report.terms if v > 0}
    assert nonzero == {"discretization_d1", "discretization_d2_dir", "strong_neighborhood"}


def test_alpha_terms_grow_with_constant():
    prev = None
    for c in (0.0, 0.5, 1.0, 2.0, 4.0):
        cert = ConditionCertificate(1.0, 1.0, PowerAlpha(c), PowerBeta(1.0, 2.0), "rho")
        r = bound_2_10(_inputs("d2_rho_210", cert, T=256.0, h=64.0))
        cur = (r.term("orderliness_cells"), r.term("orderliness_sections"))
        if prev is not None:
            assert cur[0] >= prev[0] and cur[1] >= prev[1]
        prev = cur


def test_totals_equal_sum_of_terms():
    rng = np.random.default_rng(42)
    for theorem, kind in [("d2_rho_210", "rho"), ("d2_rho_211", "rho"), ("d2_beta", "beta"),
                          ("d2_phi", "phi"), ("dtv_counts", "rho"), ("d2_tilde", "rho")]:
        for _ in range(10):
            cert = ConditionCertificate(2.0, 1.0, PowerAlpha(float(rng.uniform(0, 2))), PowerBeta(1.0, 2.0), kind)
            T = float(rng.uniform(4, 400))
            r = evaluate_bound(_inputs(theorem, cert, T=T, h=float(rng.uniform(1, 30)), m=int(rng.integers(0, 6))))
            assert all(v >= 0 for _, v in r.terms)
            assert r.total == pytest.approx(math.fsum(v for _, v in r.terms), rel=1e-12)


def test_theorem_kind_compatibility():
    with pytest.raises(ValueError):
        bound_2_10(_inputs("d2_phi", POWER_RHO))
    phi_cert = replace(POWER_RHO, mixing_kind="phi")
    with pytest.raises(ValueError):
        bound_thm_2D(_inputs("d2_beta", replace(POWER_RHO, mixing_kind="rho")))
    assert bound_thm_2D(_inputs("d2_beta", phi_cert)).total > 0


def test_beta_phi_mixing_vanishes_for_zero_certificate():
    for theorem in ("d2_beta", "d2_phi"):
        cert = replace(ZERO_RHO, mixing_kind="phi")
        r = bound_thm_2D(_inputs(theorem, cert, m=2))
        assert r.term("mixing") == 0.0
        if theorem == "d2_beta":
            assert r.term("mixing_orderliness") == 0.0
        assert "constants_from_proof" in r.flags


def test_count_bound_zero_certificate():
    r = bound_thm_2G(_inputs("dtv_counts", ZERO_RHO, T=64.0, h=8.0, m=2))
    assert {label for label, v in r.terms if v > 0} == {"strong_neighborhood"}
    assert r.total == r.term("strong_neighborhood")
    assert "discretization_d1" not in r.labels


def test_volume_preserving_bound_reduces_when_w_is_T():
    a = bound_thm_2I(_inputs("d2_tilde"))
    b = bound_2_10(_inputs("d2_rho_210"))
    assert a.terms == b.terms


def test_volume_preserving_bound_scales_first_term():
    sched = StretchSchedule(1 / 16, 1.0)
    a = bound_thm_2I(_inputs("d2_tilde", schedule=sched))
    b = bound_2_10(_inputs("d2_rho_210", schedule=sched))
    assert a.term("discretization_d1") == pytest.approx(16 * b.term("discretization_d1"), rel=1e-14)
    for (la, va), (lb, vb) in zip(a.terms[1:], b.terms[1:]):
        assert la == lb and va == vb


def test_fixed_limit_regularity_term():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    r = bound_thm_2K(_inputs("d2_fixed_limit", T=16.0, h=16.0, m=1, extra=(1.0, 1.0)))
    assert r.term("regularity") == pytest.approx(0.25, rel=1e-14)
    flat = bound_thm_2K(_inputs("d2_fixed_limit", T=16.0, h=16.0, m=1, extra=(0.0, 1.0)))
    base = bound_thm_2I(_inputs("d2_tilde", T=16.0, h=16.0, m=1))
    assert flat.total == base.total
    with pytest.raises(ValueError):
        bound_thm_2K(_inputs("d2_fixed_limit", T=16.0, h=16.0, m=1))


def test_optimize_single_point_and_tie_break():
    inputs = _inputs("d2_rho_210")
    m, h, report = optimize_parameters(inputs, [3], [17.0])
    assert (m, h) == (3, 17.0)
    assert report.total == bound_2_10(replace(inputs, m=3, h=17.0)).total
    m, h, _ = optimize_parameters(_inputs("d2_rho_210", ZERO_RHO), [5, 0, 2], [256.0])
    assert m == 0
    # totals past the weak-set clamp are all equal; the smallest m wins
    m, _, _ = optimize_parameters(_inputs("d2_rho_210", ZERO_RHO, T=4.0, h=4.0), [9, 12, 15], [4.0])
    assert m == 9


def test_optimize_matches_brute_force():
    inputs = _inputs("d2_rho_210", T=1024.0)
    ms, hs = range(0, 12), [2.0 ** k for k in range(0, 11)]
    m, h, report = optimize_parameters(inputs, ms, hs)
    best = min(bound_2_10(replace(inputs, m=a, h=b)).total for a in ms for b in hs)
    assert report.total == pytest.approx(best, rel=1e-12)


def test_convergence_check_examples():
    for r in (0.1, 1.0, 10.0):
        res = convergence_check(1.0, r, 1.5)
        assert res.holds and res.threshold == 1.0
    res = convergence_check(0.5, 1.0, 2.0)
    assert not res.holds and res.threshold == 2.0
    assert convergence_check(0.5, 1.0, 2.01).holds
    assert convergence_check(0.5, 1.0, 3.1, "cor2J").threshold == 3.0
    res = convergence_check(0.5, 1.0, 10.0, "cor2L", z=0.5, D1=1)
    assert not res.holds and "z" in res.explanation
    assert convergence_check(0.5, 1.0, 10.0, "cor2L", z=1.5, D1=1).holds


def test_simplified_condition_implies_convergence():
    for delta in np.linspace(0.05, 1.0, 20):
        for r in np.linspace(0.01, 5, 40):
            if r > (1 - delta) / (1 + delta):
                assert convergence_check(delta, r, 2 / delta + 1e-9)


def test_rate_exponents():
    assert rate_exponent("beta", 1, 1) == Fraction(-1, 3)
    assert rate_exponent("phi", 1, 1) == Fraction(-2, 3)
    for D1 in range(1, 6):
        assert rate_exponent("rho", D1, 1) == Fraction(-3, D1 + 6)
    with pytest.raises(ValueError):
        rate_exponent("rho", 1, 1, alpha_r=0)
