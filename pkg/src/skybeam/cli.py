"""Command-line pipeline: ingest -> qualify -> discretize -> coverage ->
optimize -> report, with per-stage subcommands and cached coverage.

Every run writes effective_config.json (the parameter block plus its
hash) beside the outputs, and all artifact names embed the first twelve
hash characters, so results always identify the configuration that
produced them. Identical configurations produce byte-identical artifacts.

Exit codes: 0 ok, 2 config error, 3 data error, 4 solver cap, 5 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import config as cfgmod
from . import coverage as covmod
from . import economics, geo, ingest, optimize, physics, report
from .errors import (CacheMismatchError, ConfigError, DataError, SkybeamError,
                     SolutionInvalidError, SolverCapError)


def _log(message: str) -> None:
    print(message, flush=True)


# --- pipeline stages ---------------------------------------------------------


@dataclass
class Inputs:
    airports: dict
    airport_report: ingest.IngestReport
    flights: list
    flight_report: ingest.IngestReport
    farms: list
    farm_report: ingest.IngestReport
    airport_states: dict | None


def load_inputs(cfg: cfgmod.RunConfig) -> Inputs:
    airports, airport_report = ingest.load_airports(cfg.airports_path, cfg.airports_columns)
    flights, flight_report = ingest.load_flights(cfg.flights_path, airports, cfg.flights_columns)
    farms, farm_report = ingest.load_farms(cfg.farms_path, cfg.farms_columns)
    states = ingest.load_airport_states(cfg.airport_states_path) if cfg.airport_states_path else None
    _log(f"loaded {flight_report.accepted} flights, {airport_report.accepted} airports, "
         f"{farm_report.accepted} farms")
    return Inputs(airports, airport_report, flights, flight_report, farms, farm_report, states)


@dataclass
class Stage:
    altitude_m: float
    qualified: list
    trajectories: list
    records: list
    flight_ids: tuple
    grid: covmod.TimeGrid
    coverage: covmod.CoverageSet
    n_antipodal: int


def _coverage_cache_key(cfg: cfgmod.RunConfig, altitude_m: float) -> bytes:
    payload = {
        "beam": dataclasses.asdict(cfg.beam),
        "dt_s": cfg.dt_s,
        "tau_max_s": cfg.tau_max_s,
        "altitude_m": altitude_m,
        "earth_radius_km": cfg.earth_radius_km,
        "flights_sha": cfgmod.file_sha256(cfg.flights_path),
        "airports_sha": cfgmod.file_sha256(cfg.airports_path),
        "farms_sha": cfgmod.file_sha256(cfg.farms_path),
    }
    return hashlib.sha256(cfgmod.canonical_json(payload).encode()).digest()


def build_stage(cfg: cfgmod.RunConfig, inputs: Inputs, altitude_m: float,
                cache_dir: Path | None) -> Stage:
    qualified = physics.qualify_farms(inputs.farms, cfg.beam, altitude_m)
    trajectories, records, n_antipodal = geo.discretize_flights(
        inputs.flights, inputs.airports, altitude_m, cfg.aircraft.cruise_speed_ms,
        cfg.dt_s, cfg.earth_radius_km,
    )
    if n_antipodal:
        _log(f"warning: excluded {n_antipodal} antipodal flight routes")
    if not records:
        raise DataError("no usable flight records after validation")
    grid = covmod.build_time_grid(records, cfg.dt_s, cfg.tau_max_s)
    _log(f"altitude {altitude_m:.0f} m: {len(qualified)} qualified farms, "
         f"{len(records)} flights, {grid.n_steps} time steps")

    key = _coverage_cache_key(cfg, altitude_m)
    cov = None
    if cache_dir is not None:
        cache_path = cache_dir / f"coverage_a{int(altitude_m)}_{key.hex()[:12]}.sphc"
        if cache_path.is_file():
            try:
                lo, hi = covmod.airborne_arrays(trajectories, grid)
                cov = covmod.CoverageSet.load(
                    cache_path, key, grid, len(qualified), len(trajectories), lo, hi,
                )
                _log(f"coverage cache hit: {cache_path.name} ({cov.n_entries} entries)")
            except CacheMismatchError:
                cov = None
    if cov is None:
        cov = covmod.compute_coverage(trajectories, qualified, grid, None, cfg.beam,
                                      cfg.earth_radius_km)
        _log(f"coverage computed: {cov.n_entries} entries")
        if cache_dir is not None:
            cache_dir.mkdir(parents=True, exist_ok=True)
            cov.save(cache_dir / f"coverage_a{int(altitude_m)}_{key.hex()[:12]}.sphc", key)
    return Stage(
        altitude_m=altitude_m, qualified=qualified, trajectories=trajectories,
        records=records, flight_ids=tuple(r.flight_id for r in records),
        grid=grid, coverage=cov, n_antipodal=n_antipodal,
    )


def _write_effective_config(cfg: cfgmod.RunConfig, out: Path) -> str:
    run_hash = cfgmod.config_hash(cfg)
    doc = {"config": cfgmod.config_to_dict(cfg), "config_hash": run_hash,
           "eta_sys": physics.end_to_end_efficiency(cfg.beam)}
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return run_hash


def _write_ingest_report(inputs: Inputs, n_antipodal: int, path: Path) -> None:
    doc = {
        "flights": inputs.flight_report.to_json_dict(),
        "airports": inputs.airport_report.to_json_dict(),
        "farms": inputs.farm_report.to_json_dict(),
        "antipodal_excluded": n_antipodal,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _report_context(cfg, stage: Stage, solution, inputs: Inputs, scenario: str = ""):
    cov = stage.coverage
    return report.ReportContext(
        solution=solution, coverage=cov, trajectories=stage.trajectories,
        flight_records=stage.records, farms=stage.qualified,
        econ=cfg.econ, aircraft=cfg.aircraft, airport_states=inputs.airport_states,
        day_night_mode=cfg.day_night_mode, scenario=scenario,
    )


def _emit_solution_reports(cfg, stage: Stage, solution, inputs: Inputs, out: Path,
                           run_id: str) -> None:
    ctx = _report_context(cfg, stage, solution, inputs)
    if inputs.airport_states is None:
        _log("warning: no airport-states file; state cuts grouped under UNKNOWN")
    for dimension in ("range_class", "day_night", "farm_state", "state_origin", "state_dest"):
        rows = report.aggregate(ctx, dimension)
        report.emit_csv(rows, out / f"{run_id}_{dimension}.csv", run_id)
    report.emit_farms_geojson(ctx, out / f"{run_id}_farms.geojson", run_id)
    report.emit_flights_geojson(ctx, out / f"{run_id}_flights.geojson", run_id)
    if solution.kind == "schedule":
        dist_rows = report.shift_distribution(solution, ctx, cfg.dt_s)
        report.emit_rows_csv(
            out / f"{run_id}_shift_distribution.csv",
            ["range_class", "n_flights", "n_affected", "min_s", "q1_s", "median_s",
             "q3_s", "max_s"],
            dist_rows, run_id,
        )


def _solve_schedule(cfg, problem) -> optimize.Solution:
    if cfg.backend == "greedy":
        return optimize.solve_greedy(problem)
    model = optimize.build_schedule_model(problem)
    return optimize.solve_exact(model, gap_tol=cfg.gap_tol,
                                time_limit_s=cfg.exact_time_limit_s,
                                var_cap=cfg.exact_var_cap)


def _export_schedule_models(cfg, out: Path, run_id: str, inputs: Inputs) -> int:
    """Backend "export": write per-altitude model files instead of solving."""
    shifts = covmod.ShiftSet.build(cfg.tau_max_s, cfg.dt_s)
    for altitude in cfg.altitudes_m:
        stage = build_stage(cfg, inputs, altitude, out / "cache")
        stage.coverage.shifts = shifts
        problem = optimize.make_schedule_problem(stage.coverage, stage.qualified,
                                                 stage.flight_ids, shifts, cfg)
        model = optimize.build_schedule_model(problem)
        alt_dir = out / f"alt_{int(altitude)}m"
        alt_dir.mkdir(parents=True, exist_ok=True)
        path = alt_dir / f"{run_id}_schedule_model.lp"
        optimize.export_model(model, path, "lp-text")
        _log(f"altitude {altitude:.0f} m: exported {model.n_vars}-variable model to {path}")
    return 0


def _export_choice_models(cfg, out: Path, run_id: str, stage: Stage) -> int:
    """Backend "export": one model file per penetration scenario."""
    choice_dir = out / "choice"
    choice_dir.mkdir(parents=True, exist_ok=True)
    for rho_f in cfg.rho_farm_grid:
        for rho_i in cfg.rho_flight_grid:
            problem = optimize.make_choice_problem(stage.coverage, stage.qualified,
                                                   stage.flight_ids, rho_f, rho_i, cfg)
            model = optimize.build_choice_model(problem)
            path = choice_dir / f"{run_id}_choice_{rho_f:g}_{rho_i:g}.lp"
            optimize.export_model(model, path, "lp-text")
    _log(f"exported {len(cfg.rho_farm_grid) * len(cfg.rho_flight_grid)} scenario models "
         f"to {choice_dir}")
    return 0


# --- subcommands -------------------------------------------------------------


def cmd_validate(cfg: cfgmod.RunConfig, args) -> int:
    problems = cfg.validate(check_files=True)
    doc = {"config": cfgmod.config_to_dict(cfg), "config_hash": cfgmod.config_hash(cfg),
           "problems": problems}
    if not problems:
        doc["eta_sys"] = physics.end_to_end_efficiency(cfg.beam)
        doc["p_cruise_mw"] = physics.cruise_power_mw(cfg.aircraft)
    print(json.dumps(doc, sort_keys=True, indent=2))
    if problems:
        raise ConfigError("; ".join(problems))
    return 0


def _validated(cfg: cfgmod.RunConfig) -> cfgmod.RunConfig:
    problems = cfg.validate(check_files=True)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def cmd_coverage(cfg: cfgmod.RunConfig, args) -> int:
    cfg = _validated(cfg)
    out = Path(cfg.out_dir)
    run_id = _write_effective_config(cfg, out)[:12]
    inputs = load_inputs(cfg)
    for altitude in cfg.altitudes_m:
        stage = build_stage(cfg, inputs, altitude, out / "cache")
        _write_ingest_report(inputs, stage.n_antipodal, out / f"{run_id}_ingest.json")
    return 0


def cmd_schedule(cfg: cfgmod.RunConfig, args) -> int:
    cfg = _validated(cfg)
    out = Path(cfg.out_dir)
    run_hash = _write_effective_config(cfg, out)
    run_id = run_hash[:12]
    inputs = load_inputs(cfg)
    if cfg.backend == "export":
        return _export_schedule_models(cfg, out, run_id, inputs)
    shifts = covmod.ShiftSet.build(cfg.tau_max_s, cfg.dt_s)
    for altitude in cfg.altitudes_m:
        stage = build_stage(cfg, inputs, altitude, out / "cache")
        _write_ingest_report(inputs, stage.n_antipodal, out / f"{run_id}_ingest.json")
        cov = stage.coverage
        cov.shifts = shifts
        problem = optimize.make_schedule_problem(cov, stage.qualified, stage.flight_ids,
                                                 shifts, cfg)
        solution = _solve_schedule(cfg, problem)
        _log(f"altitude {altitude:.0f} m: Z = {solution.z_usd:.2f} USD "
             f"({solution.status}, {solution.energy_mwh:.3f} MWh, "
             f"{solution.duration_min:.1f} min)")
        alt_dir = out / f"alt_{int(altitude)}m"
        alt_dir.mkdir(parents=True, exist_ok=True)
        (alt_dir / f"{run_id}_schedule_solution.json").write_bytes(
            solution.to_json_bytes() + b"\n")
        _emit_solution_reports(cfg, stage, solution, inputs, alt_dir, run_id)
    return 0


def cmd_choice(cfg: cfgmod.RunConfig, args) -> int:
    cfg = _validated(cfg)
    out = Path(cfg.out_dir)
    run_hash = _write_effective_config(cfg, out)
    run_id = run_hash[:12]
    inputs = load_inputs(cfg)
    altitude = cfg.altitudes_m[0]
    stage = build_stage(cfg, inputs, altitude, out / "cache")
    _write_ingest_report(inputs, stage.n_antipodal, out / f"{run_id}_ingest.json")
    if cfg.backend == "export":
        return _export_choice_models(cfg, out, run_id, stage)

    base = optimize.make_choice_problem(stage.coverage, stage.qualified, stage.flight_ids,
                                        1.0, 1.0, cfg)
    grid = [(rf, ri) for rf in cfg.rho_farm_grid for ri in cfg.rho_flight_grid]
    backend = "greedy" if cfg.backend == "greedy" else "exact"
    result = optimize.penetration_sweep(base, grid, backend=backend, gap_tol=cfg.gap_tol,
                                        time_limit_s=cfg.exact_time_limit_s,
                                        var_cap=cfg.exact_var_cap)
    ok = sum(1 for row in result.rows if row.solution is not None)
    _log(f"penetration sweep: {ok}/{len(result.rows)} scenarios solved")

    choice_dir = out / "choice"
    choice_dir.mkdir(parents=True, exist_ok=True)
    p_cruise = physics.cruise_power_mw(cfg.aircraft)
    scen_rows = []
    flight_geo_features = []
    for row in result.rows:
        sol = row.solution
        if sol is None:
            scen_rows.append({
                "rho_farms": row.rho_farms, "rho_flights": row.rho_flights,
                "status": "error", "z_usd": 0.0, "energy_mwh": 0.0, "duration_min": 0.0,
                "fuel_saving_usd": 0.0, "co2_saving_usd": 0.0, "error": row.error,
            })
            continue
        b = economics.breakdown(sol.energy_mwh, sol.duration_min, cfg.econ, cfg.aircraft, p_cruise)
        scen_rows.append({
            "rho_farms": row.rho_farms, "rho_flights": row.rho_flights,
            "status": sol.status, "z_usd": sol.z_usd, "energy_mwh": sol.energy_mwh,
            "duration_min": sol.duration_min, "fuel_saving_usd": b.fuel_saving_usd,
            "co2_saving_usd": b.co2_saving_usd, "error": "",
        })
        scenario = f"{row.rho_farms:g}/{row.rho_flights:g}"
        ctx = _report_context(cfg, stage, sol, inputs, scenario=scenario)
        flight_geo_features.extend(report.flight_features(
            ctx, extra_properties={"rho_farms": row.rho_farms, "rho_flights": row.rho_flights},
            only_flights=set(sol.selected_flights),
        ))
    report.emit_rows_csv(
        choice_dir / f"{run_id}_scenarios.csv",
        ["rho_farms", "rho_flights", "status", "z_usd", "energy_mwh", "duration_min",
         "fuel_saving_usd", "co2_saving_usd", "error"],
        scen_rows, run_id,
    )
    freq_rows = [
        {"farm_id": farm.farm_id, "state": farm.base.state,
         "dc_capacity_mw": farm.base.dc_capacity_mw, "p_effective_mw": farm.p_effective_mw,
         "selection_count": result.farm_selection_counts[f], "n_scenarios": len(result.rows)}
        for f, farm in enumerate(stage.qualified)
    ]
    report.emit_rows_csv(
        choice_dir / f"{run_id}_farm_frequency.csv",
        ["farm_id", "state", "dc_capacity_mw", "p_effective_mw", "selection_count",
         "n_scenarios"],
        freq_rows, run_id,
    )
    report.write_geojson(choice_dir / f"{run_id}_selected_flights.geojson",
                         flight_geo_features, run_id)
    return 0


def cmd_report(cfg: cfgmod.RunConfig, args) -> int:
    cfg = _validated(cfg)
    out = Path(cfg.out_dir)
    run_id = cfgmod.config_hash(cfg)[:12]
    inputs = load_inputs(cfg)
    found = 0
    for altitude in cfg.altitudes_m:
        alt_dir = out / f"alt_{int(altitude)}m"
        sol_path = alt_dir / f"{run_id}_schedule_solution.json"
        if not sol_path.is_file():
            continue
        found += 1
        solution = optimize.Solution.from_json_dict(json.loads(sol_path.read_text()))
        stage = build_stage(cfg, inputs, altitude, out / "cache")
        stage.coverage.shifts = covmod.ShiftSet.build(cfg.tau_max_s, cfg.dt_s)
        _emit_solution_reports(cfg, stage, solution, inputs, alt_dir, run_id)
    if not found:
        raise DataError(
            f"no stored solutions under {out} for this configuration; run `schedule` first"
        )
    return 0


def cmd_export_model(cfg: cfgmod.RunConfig, args) -> int:
    cfg = _validated(cfg)
    out = Path(cfg.out_dir)
    inputs = load_inputs(cfg)
    altitude = cfg.altitudes_m[0]
    stage = build_stage(cfg, inputs, altitude, out / "cache")
    if args.kind == "schedule":
        shifts = covmod.ShiftSet.build(cfg.tau_max_s, cfg.dt_s)
        stage.coverage.shifts = shifts
        problem = optimize.make_schedule_problem(stage.coverage, stage.qualified,
                                                 stage.flight_ids, shifts, cfg)
        model = optimize.build_schedule_model(problem)
    else:
        rho_f = args.rho_farm if args.rho_farm is not None else 1.0
        rho_i = args.rho_flight if args.rho_flight is not None else 1.0
        problem = optimize.make_choice_problem(stage.coverage, stage.qualified,
                                               stage.flight_ids, rho_f, rho_i, cfg)
        model = optimize.build_choice_model(problem)
    path = Path(args.model_out)
    path.parent.mkdir(parents=True, exist_ok=True)
    optimize.export_model(model, path, args.format)
    _log(f"wrote {args.format} model with {model.n_vars} variables to {path}")
    return 0


# --- argument plumbing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skybeam",
        description="Ground-to-air power beaming: coverage precomputation and "
                    "schedule/selection optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "check the configuration and input files"),
        ("coverage", "precompute and cache coverage tensors"),
        ("schedule", "run the flight schedule optimization pipeline"),
        ("choice", "run the farm-and-flight penetration sweep"),
        ("report", "re-emit report files from stored solutions"),
        ("export-model", "write the MILP to an LP-text or MPS file"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--dt", type=int, help="override time step, s")
        p.add_argument("--tau-max", type=int, help="override max schedule shift, s")
        p.add_argument("--altitude", type=float, action="append",
                       help="override cruise altitude(s), m (repeatable)")
        p.add_argument("--backend", choices=("exact", "greedy", "export"),
                       help="override solver backend")
        p.add_argument("--rho-farm", type=float, help="single farm penetration rate")
        p.add_argument("--rho-flight", type=float, help="single flight penetration rate")
        p.add_argument("--out", help="override output directory")
        if name == "export-model":
            p.add_argument("--kind", choices=("schedule", "choice"), default="schedule")
            p.add_argument("--format", choices=("lp-text", "mps"), default="lp-text")
            p.add_argument("--model-out", required=True, help="path for the model file")
    return parser


def _config_from_args(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load_config(args.config)
    overrides = {}
    if args.dt is not None:
        overrides["dt_s"] = args.dt
    if args.tau_max is not None:
        overrides["tau_max_s"] = args.tau_max
    if args.altitude:
        overrides["altitudes_m"] = tuple(args.altitude)
    if args.backend:
        overrides["backend"] = args.backend
    if args.rho_farm is not None:
        overrides["rho_farm_grid"] = (args.rho_farm,)
    if args.rho_flight is not None:
        overrides["rho_flight_grid"] = (args.rho_flight,)
    if args.out:
        overrides["out_dir"] = args.out
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


COMMANDS = {
    "validate": cmd_validate,
    "coverage": cmd_coverage,
    "schedule": cmd_schedule,
    "choice": cmd_choice,
    "report": cmd_report,
    "export-model": cmd_export_model,
}


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, (DataError, SolutionInvalidError, CacheMismatchError)):
        return 3
    if isinstance(exc, SolverCapError):
        return 4
    return 5


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return COMMANDS[args.command](cfg, args)
    except (SkybeamError, OSError) as exc:
        code = _exit_code_for(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "exit_code": code}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
