"""Command line entry point.

Exit codes: 0 on success, 1 when a validation run finds violations, 2 on
configuration errors and 3 when a single-shot ``bound`` call is infeasible.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from pydantic import ValidationError

from ..bounds import BoundInputs, Theorem, optimize_parameters
from ..lrdtest import InfeasibleTestError, TestConfig, calibrate_critical_value, run_test
from .config import ConfigError, ExperimentConfig, ExperimentKind, load_config
from .experiments import parameter_grids, empirical_d2_at, run_experiment, simulate_patterns
from .io import ResultRow, to_jsonable, read_pattern, write_pattern, write_results

log = logging.getLogger("ppapprox")

EXIT_OK, EXIT_FAILED, EXIT_SCHEMA, EXIT_INFEASIBLE = 0, 1, 2, 3


def _override(config: ExperimentConfig, **updates) -> ExperimentConfig:
    data = config.model_dump(mode="json", by_alias=True, exclude_none=True)
    data.update({k: v for k, v in updates.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def _load(args, **updates) -> ExperimentConfig:
    config = load_config(args.config)
    return _override(
        config, seed=args.seed, output_dir=args.out, theorem=getattr(args, "theorem", None), **updates
    )


def _print(obj) -> None:
    print(json.dumps(to_jsonable(obj), indent=2, sort_keys=True))


def _run_and_write(config: ExperimentConfig, jobs: int, stem: str = "results") -> int:
    rows, summary = run_experiment(config, jobs=jobs)
    csv_path, json_path = write_results(rows, summary, config.output_dir, stem)
    summary = dict(summary, csv=str(csv_path), json=str(json_path))
    _print(summary)
    return EXIT_OK


def cmd_sweep(args) -> int:
    return _run_and_write(_load(args), args.jobs)


def cmd_density(args) -> int:
    return _run_and_write(_load(args, experiment=ExperimentKind.DENSITY_EXPERIMENT.value), args.jobs, "density")


def cmd_validate(args) -> int:
    config = _load(args)
    if config.validate_ is None:
        _print({"config": str(args.config), "schema": "ok"})
        return EXIT_OK
    config = _override(config, experiment=ExperimentKind.VALIDATE_MODEL.value)
    rows, summary = run_experiment(config, jobs=1)
    write_results(rows, summary, config.output_dir, "validate")
    _print(summary)
    return EXIT_OK if summary.get("pass") else EXIT_FAILED


def cmd_bound(args) -> int:
    config = _load(args)
    if config.theorem is None:
        raise ConfigError("the bound command needs a theorem (config key 'theorem' or --theorem)")
    T = float(args.T) if args.T is not None else config.T_values[0]
    space, schedule = config.space.build(), config.schedule.build()
    try:
        space.check_T(T)
        schedule.check_on([T])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ms, hs = parameter_grids(config, space, T)
    base = BoundInputs(space, schedule, T, hs[0], ms[0], config.certificate(), config.theorem,
                       extra=None if config.regularity is None else tuple(config.regularity), rough=config.rough)
    m, h, rep = optimize_parameters(base, ms, hs)
    out = rep.as_dict()
    out.update({"T": T, "m": m, "h": h})
    _print(out)
    if math.isinf(rep.total) or "epsilon_infinite" in rep.flags:
        log.error("bound is infeasible at T=%s (epsilon or total infinite)", T)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    space = config.space.build()
    written = []
    for T, w, pattern in simulate_patterns(config):
        path = write_pattern(pattern, out / f"pattern_T{T:g}.txt", space.d1_dims, space.d2_dims, T, w)
        written.append({"T": T, "w": w, "points": len(pattern), "file": str(path)})
    _print({"seed": config.seed, "patterns": written})
    return EXIT_OK


def cmd_distance(args) -> int:
    config = _load(args)
    model = config.process_model()
    if model is None:
        raise ConfigError("the distance command needs a simulator model")
    samples = (config.mc.samples if config.mc is not None else None) or 200
    schedule = config.schedule.build()
    rows = []
    for i, T in enumerate(config.T_values):
        d = empirical_d2_at(model, T, schedule(T), samples, config.seed, i)
        rows.append(ResultRow(f"distance-{config.seed}", T, "empirical_d2", empirical=d, seed=config.seed,
                              extra={"samples": samples}))
    write_results(rows, {"seed": config.seed, "samples": samples}, config.output_dir, "distance")
    _print([{"T": r.T, "empirical_d2": r.empirical} for r in rows])
    return EXIT_OK


def cmd_lrd_test(args) -> int:
    if args.pattern is None:
        return _run_and_write(_load(args, experiment=ExperimentKind.LRD_SIZE_POWER.value), args.jobs, "lrd")
    config = _load(args)
    if config.lrd is None or config.mc is None:
        raise ConfigError("lrd-test needs the 'lrd' and 'mc' sections")
    pattern, meta = read_pattern(args.pattern)
    space = config.space.build()
    if (meta["D1"], meta["D2"]) != (space.d1_dims, space.d2_dims):
        raise ConfigError(f"pattern dimensions {meta['D1']},{meta['D2']} do not match the configuration")
    L = config.lrd
    tc = TestConfig(space, L.alpha, L.smooth_slope, L.epsilon, L.null_ell, meta["T"], meta["w"],
                    config.mc.calibration or 2000, config.seed, L.lipschitz_LD)
    try:
        cal = calibrate_critical_value(tc)
    except InfeasibleTestError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    res = run_test(tc, pattern, cal)
    _print({"statistic": res.statistic, "t_alpha": res.t_alpha, "reject": res.reject,
            "size_deficit_bound": res.size_deficit_bound})
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "distance": cmd_distance,
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "density": cmd_density,
    "lrd-test": cmd_lrd_test,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppapprox", description="Poisson approximation bounds and experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML experiment configuration")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--theorem", choices=[t.value for t in Theorem], help="override the theorem label")
        p.add_argument("--jobs", type=int, default=1, help="worker processes over the T grid")
        if name == "bound":
            p.add_argument("--T", type=float, help="evaluate at this T instead of the first grid value")
        if name == "lrd-test":
            p.add_argument("--pattern", type=Path, help="pattern file to test instead of a size/power study")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        log.error("--jobs must be >= 1")
        return EXIT_SCHEMA
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        log.error("--seed must be an unsigned 64-bit integer")
        return EXIT_SCHEMA
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error:\n%s", exc)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
