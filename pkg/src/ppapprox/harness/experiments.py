"""Experiment pipelines.

Every pipeline works one ``T`` value at a time and returns
:class:`~ppapprox.harness.io.ResultRow` objects.  Random streams are keyed
by ``(master seed, T index, purpose)``, so the output does not depend on how
the ``T`` values are spread over workers.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from ..bounds import BoundInputs, Theorem, evaluate_bound, optimize_parameters, rate_exponent
from ..density import bound_thm_3A, bound_thm_3C, mc_density_experiment, triangular_kernel, uniform_kernel
from ..geometry import Box, apply_transform, unit_cube, window_JT
from ..lrdtest import TestConfig, calibrate_critical_value, rejection_rate, size_deficit_bound
from ..metrics import PointPattern, empirical_d2, empirical_dtv
from ..models import (
    ClusterBounded,
    DensitySpec,
    HomogeneousPoisson,
    InhomogeneousPoisson,
    MarkovModulated,
    MixingKind,
    PowerAlpha,
    PowerBeta,
    ProcessModel,
    expectation_measure,
    sample,
    verify_orderliness,
)
from .config import ExperimentConfig, ExperimentKind, Log2Grid, config_hash
from .io import ResultRow

__all__ = [
    "auto_grids",
    "parameter_grids",
    "poisson_counterpart",
    "stream",
    "fitted_slope",
    "run_experiment",
    "run_single_T",
    "audit_rows",
    "simulate_patterns",
    "empirical_d2_at",
]

# purposes of the random streams within one T index
_MODEL, _POISSON, _BOOT, _EXTRA = 0, 1, 2, 3


def stream(seed: int, t_index: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(t_index), int(purpose)))


def auto_grids(space, T: float) -> tuple[list[int], list[float]]:
    """``m`` in ``{0, 1, 2, 4, ..., ceil(T^{1/D2})}`` and ``h`` in ``{1, T^{1/2}, T, T^{3/2}}``."""
    cap = math.ceil(T ** (1.0 / space.d2_dims) - 1e-12)
    ms = [0]
    k = 1
    while k < cap:
        ms.append(k)
        k *= 2
    ms.append(cap)
    return sorted(set(ms)), [1.0, T ** 0.5, T, T ** 1.5]


def parameter_grids(config: ExperimentConfig, space, T: float):
    auto_m, auto_h = auto_grids(space, T)
    p = config.parameters
    if p is None:
        return auto_m, auto_h
    ms = auto_m if p.m == "auto" else (p.m.values() if isinstance(p.m, Log2Grid) else list(p.m))
    hs = auto_h if p.h == "auto" else (p.h.values() if isinstance(p.h, Log2Grid) else list(p.h))
    return [int(round(x)) for x in ms], [float(x) for x in hs]


def poisson_counterpart(model: ProcessModel) -> ProcessModel:
    """Poisson process with the same expectation measure."""
    var = model.variant
    if isinstance(var, (HomogeneousPoisson, InhomogeneousPoisson)):
        return model
    if isinstance(var, ClusterBounded):
        return replace(model, variant=HomogeneousPoisson(var.intensity))
    if isinstance(var, MarkovModulated):
        return replace(model, variant=HomogeneousPoisson(var.mean_rate))
    raise ValueError(f"no Poisson counterpart for {type(var).__name__}")


def fitted_slope(Ts, values) -> float:
    """Least squares slope of ``log values`` against ``log T`` over the finite positive entries."""
    x = np.log(np.asarray(Ts, dtype=float))
    y = np.asarray(values, dtype=float)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])


def _bound_row(config, exp_id, T, theorem, cert, space, schedule, note=""):
    ms, hs = parameter_grids(config, space, T)
    base = BoundInputs(space, schedule, T, hs[0], ms[0], cert, theorem,
                       extra=None if config.regularity is None else tuple(config.regularity), rough=config.rough)
    m, h, rep = optimize_parameters(base, ms, hs)
    return ResultRow(exp_id, T, theorem.value, total=rep.total, terms=dict(rep.terms), seed=config.seed, m=m, h=h,
                     note=";".join(rep.flags) if not note else note,
                     extra={"epsilon": rep.auxiliaries["epsilon"], "lambda_lower": rep.auxiliaries["lambda_lower"]})


def _transformed(pattern: PointPattern, space, T, w) -> PointPattern:
    if len(pattern) == 0:
        return PointPattern(np.zeros((0, space.dim)), space.dim)
    return PointPattern(apply_transform(space, w, T, pattern.points), space.dim).restrict(unit_cube(space))


def empirical_d2_at(model: ProcessModel, T: float, w: float, samples: int, seed: int, t_index: int) -> float:
    """``empirical_d2`` between ``samples`` transformed patterns of the model and of its Poisson counterpart."""
    space = model.space
    window = window_JT(space, w, T)
    pois = poisson_counterpart(model)
    a = [_transformed(sample(model, window, s), space, T, w) for s in stream(seed, t_index, _MODEL).spawn(samples)]
    b = [_transformed(sample(pois, window, s), space, T, w) for s in stream(seed, t_index, _POISSON).spawn(samples)]
    return empirical_d2(a, b)


# --- per-T pipelines ---------------------------------------------------------


def _bound_sweep(config, exp_id, i, T):
    space, schedule = config.space.build(), config.schedule.build()
    return [_bound_row(config, exp_id, T, config.theorem, config.certificate(), space, schedule)]


def _domination_counts(config, exp_id, i, T):
    space, schedule = config.space.build(), config.schedule.build()
    model = config.process_model()
    row = _bound_row(config, exp_id, T, Theorem.DTV_COUNTS, config.certificate(), space, schedule)
    n = config.mc.replicates or 10000
    window = window_JT(space, schedule(T), T)
    counts = np.array([len(sample(model, window, s)) for s in stream(config.seed, i, _MODEL).spawn(n)])
    nu = expectation_measure(model, window)
    pois = np.random.Generator(np.random.Philox(stream(config.seed, i, _POISSON))).poisson(nu, n)
    emp = empirical_dtv(counts, pois)
    rng = np.random.Generator(np.random.Philox(stream(config.seed, i, _BOOT)))
    boots = [empirical_dtv(rng.choice(counts, n), rng.choice(pois, n)) for _ in range(config.mc.bootstrap)]
    row.empirical, row.mc_se = emp, float(np.std(boots, ddof=1))
    row.extra.update({"nu_JT": nu, "dominated": float(row.total >= emp - 3 * row.mc_se)})
    return [row]


def _domination_d2_slope(config, exp_id, i, T):
    space, schedule = config.space.build(), config.schedule.build()
    row = _bound_row(config, exp_id, T, config.theorem, config.certificate(), space, schedule)
    n = config.mc.samples or 200
    row.empirical = empirical_d2_at(config.process_model(), T, schedule(T), n, config.seed, i)
    return [row]


def _density_experiment(config, exp_id, i, T):
    space, schedule = config.space.build(), config.schedule.build()
    w = schedule(T)
    model = config.process_model()
    d1 = space.d1_dims
    half = w ** (-1.0 / d1)
    # certificate on the data range actually observed in J_T
    model_T = replace(model, s_window=Box((-half,) * d1, (half,) * d1))
    cert = model_T.certificate
    kernel = uniform_kernel(d1) if config.density.kernel == "uniform" else triangular_kernel(d1)
    n = config.mc.replicates or 2000
    res = mc_density_experiment(model_T, kernel, T, w, n, stream(config.seed, i, _MODEL))
    nu = expectation_measure(model_T, window_JT(space, w, T))
    M = config.density.M or max(1, math.ceil(3 * nu))
    if isinstance(model.variant, (HomogeneousPoisson, InhomogeneousPoisson)):
        d2_bound, note = 0.0, "poisson_model"
    else:
        d2_row = _bound_row(config, exp_id, T, Theorem.D2_RHO_210, cert, space, schedule)
        d2_bound, note = min(d2_row.total, 1.0), ""
    part = bound_thm_3A(d2_bound, kernel, M, cert, T, w, nu=nu, space=space)
    if isinstance(model.variant, InhomogeneousPoisson):
        density = model.variant.density
    else:
        density = DensitySpec.constant(res.p0)
    rep = bound_thm_3C(part.total, kernel, cert, density, T, w, space)
    flags = ";".join(part.flags + rep.flags)
    terms = {"coupling": part.terms["coupling"], "count_tail": part.terms["count_tail"], "sd": rep.terms["sd"],
             "bias": rep.terms["bias"]}
    se = res.sd / math.sqrt(n)
    bias_emp = res.mean - res.p0
    extra = {
        "mean": res.mean, "sd": res.sd, "p0": res.p0, "exact_mean": res.exact_mean, "bias_empirical": bias_emp,
        "kappa": cert.kappa, "nu_JT": nu, "M": M, "d2_bound": d2_bound,
        "sd_ok": float(res.sd <= rep.terms["sd"] * 1.05),
        "bias_ok": float(abs(bias_emp) <= rep.terms["bias"] * 1.05 + 3 * se),
    }
    return [ResultRow(exp_id, T, "dbw_density", total=rep.total, terms=terms, empirical=res.dbw_to_truth, mc_se=se,
                      seed=config.seed, note=";".join(x for x in (note, flags) if x), extra=extra)]


def _lrd_size_power(config, exp_id, i, T):
    space, schedule = config.space.build(), config.schedule.build()
    w = schedule(T)
    L = config.lrd
    n_cal = config.mc.calibration or 2000
    n_eval = config.mc.evaluation or 2000
    seed_int = int(stream(config.seed, i, _EXTRA).generate_state(1, np.uint64)[0])
    tc = TestConfig(space, L.alpha, L.smooth_slope, L.epsilon, L.null_ell, T, w, n_cal, seed_int, L.lipschitz_LD)
    cal = calibrate_critical_value(tc)
    null = ProcessModel(HomogeneousPoisson(L.null_ell), space)
    null_rate, null_se = rejection_rate(tc, cal, null, n_eval, stream(config.seed, i, _POISSON))
    power, power_se = rejection_rate(tc, cal, config.process_model(), n_eval, stream(config.seed, i, _MODEL))
    limit = L.alpha + 3 * math.sqrt(L.alpha * (1 - L.alpha) / n_eval)
    extra = {
        "t_alpha": cal.t_alpha, "power": power, "power_se": power_se, "size_limit": limit,
        "size_deficit_bound": size_deficit_bound(tc, cal), "lipschitz_LD": tc.lipschitz_LD,
        "size_ok": float(null_rate <= limit), "power_ok": float(power - null_rate >= 0.2),
    }
    return [ResultRow(exp_id, T, "lrd_test", empirical=null_rate, mc_se=null_se, seed=config.seed, extra=extra)]


def _validate_model(config, exp_id, i, T):
    if i != 0:
        return []
    model = config.process_model()
    rows = verify_orderliness(model, config.rectangles(), config.validate_.mc_n, stream(config.seed, 0, _MODEL))
    out = []
    for k, r in enumerate(rows):
        out.append(ResultRow(
            exp_id, T, "orderliness", total=r.bound, empirical=r.estimate, mc_se=r.std_error, seed=config.seed,
            replicate=k, note="violated" if r.violated else "",
            extra={"v": r.v, "ratio": r.ratio, "ratio_lower": r.ratio_lower, "ratio_upper": r.ratio_upper},
        ))
    return out


_PIPELINES = {
    ExperimentKind.BOUND_SWEEP: _bound_sweep,
    ExperimentKind.DOMINATION_COUNTS: _domination_counts,
    ExperimentKind.DOMINATION_D2_SLOPE: _domination_d2_slope,
    ExperimentKind.DENSITY_EXPERIMENT: _density_experiment,
    ExperimentKind.LRD_SIZE_POWER: _lrd_size_power,
    ExperimentKind.VALIDATE_MODEL: _validate_model,
}


def experiment_id(config: ExperimentConfig) -> str:
    return f"{config.experiment.value}-{config_hash(config)[:12]}"


def run_single_T(config: ExperimentConfig, t_index: int) -> list[ResultRow]:
    T = config.T_values[t_index]
    start = time.perf_counter()
    rows = _PIPELINES[config.experiment](config, experiment_id(config), t_index, T)
    elapsed = time.perf_counter() - start
    for r in rows:
        r.wall_time = elapsed / max(len(rows), 1)
    return rows


# --- summaries ----------------------------------------------------------------


def audit_rows(config: ExperimentConfig, rows) -> bool:
    """Recompute every bound row from its recorded ``(T, m, h, theorem)`` and compare totals."""
    space, schedule = config.space.build(), config.schedule.build()
    theorems = {t.value for t in Theorem}
    for r in rows:
        if r.theorem not in theorems or r.m is None:
            continue
        th = Theorem(r.theorem)
        cert = config.certificate()
        inputs = BoundInputs(space, schedule, r.T, r.h, r.m, cert, th,
                             extra=None if config.regularity is None else tuple(config.regularity), rough=config.rough)
        total = evaluate_bound(inputs).total
        if not (total == r.total or math.isclose(total, r.total, rel_tol=1e-12, abs_tol=0.0)):
            return False
    return True


_KIND_FOR = {
    Theorem.D2_RHO_210: MixingKind.RHO, Theorem.D2_RHO_211: MixingKind.RHO,
    Theorem.D2_BETA: MixingKind.BETA, Theorem.D2_PHI: MixingKind.PHI,
}


def _expected_exponent(config: ExperimentConfig):
    """Asymptotic rate for power-law certificates on the supported theorems, otherwise ``None``."""
    if config.model.kind != "certificate" or config.theorem not in _KIND_FOR:
        return None
    cert = config.certificate()
    if not isinstance(cert.alpha_check, PowerAlpha) or not isinstance(cert.beta_check, PowerBeta):
        return None
    kind = _KIND_FOR[config.theorem]
    if kind != cert.mixing_kind:
        return None
    space = config.space.build()
    exp = rate_exponent(kind, space.d1_dims, space.d2_dims, alpha_r=cert.alpha_check.r, beta_p=cert.beta_check.p,
                        delta=config.schedule.delta)
    return float(exp)


def _summary(config: ExperimentConfig, rows) -> dict:
    kind = config.experiment
    s = {
        "experiment": kind.value,
        "experiment_id": experiment_id(config),
        "config_hash": config_hash(config),
        "seed": config.seed,
        "T_values": config.T_values,
        "self_audit": audit_rows(config, rows),
    }
    Ts = [r.T for r in rows]
    if kind is ExperimentKind.BOUND_SWEEP:
        slope = fitted_slope(Ts, [r.total for r in rows])
        s["fitted_slope"] = slope
        exp = _expected_exponent(config)
        if exp is not None:
            s["expected_exponent"] = exp
            s["pass"] = bool(abs(slope - exp) <= 0.1)
    elif kind is ExperimentKind.DOMINATION_COUNTS:
        s["pass"] = all(r.total >= r.empirical - 3 * r.mc_se for r in rows)
    elif kind is ExperimentKind.DOMINATION_D2_SLOPE:
        emp = [r.empirical for r in rows]
        s["empirical_slope"] = fitted_slope(Ts, emp)
        s["bound_slope"] = fitted_slope(Ts, [r.total for r in rows])
        s["empirical_decreasing"] = all(b < a for a, b in zip(emp, emp[1:]))
        s["pass"] = bool(s["empirical_decreasing"] and s["empirical_slope"] <= s["bound_slope"] + 0.15)
    elif kind is ExperimentKind.DENSITY_EXPERIMENT:
        s["pass"] = all(r.extra["sd_ok"] and r.extra["bias_ok"] for r in rows)
    elif kind is ExperimentKind.LRD_SIZE_POWER:
        s["pass"] = all(r.extra["size_ok"] and r.extra["power_ok"] for r in rows)
    elif kind is ExperimentKind.VALIDATE_MODEL:
        s["pass"] = not any(r.note == "violated" for r in rows)
    return s


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> tuple[list[ResultRow], dict]:
    """Run the configured pipeline over the T grid and summarise.

    With ``jobs > 1`` the T values are spread over worker processes; rows are
    sorted by ``(T, replicate)`` afterwards.
    """
    start = time.perf_counter()
    idx = range(len(config.T_values))
    if jobs > 1 and len(config.T_values) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run_single_T, [config] * len(idx), idx))
    else:
        parts = [run_single_T(config, i) for i in idx]
    rows = sorted((r for part in parts for r in part), key=ResultRow.sort_key)
    summary = _summary(config, rows)
    summary["wall_time_total"] = time.perf_counter() - start
    return rows, summary


def simulate_patterns(config: ExperimentConfig):
    """One pattern of the configured model on ``J_T`` for each ``T``; yields ``(T, w, pattern)``."""
    model = config.process_model()
    if model is None:
        raise ValueError("simulation needs a simulator model")
    space, schedule = config.space.build(), config.schedule.build()
    for i, T in enumerate(config.T_values):
        w = schedule(T)
        yield T, w, sample(model, window_JT(space, w, T), stream(config.seed, i, _MODEL))
