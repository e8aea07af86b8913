import argparse
import json
import logging
import math
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import uvicorn
from fastapi import HTTPException
from pydantic import ValidationError

from app.api.routes.aero.service import load_aero_params, save_aero_params
from app.api.routes.allocation.service import allocation_round_trip
from app.api.routes.reports.service import generate_report
from app.api.routes.sim.service import run_scenario_file
from app.api.routes.sysid.schemas import FitOptions, SynthRequestDTO
from app.api.routes.sysid.service import (
    fit,
    fit_thrust_ff,
    generate_synthetic_sweep,
    read_sweep_csv,
    read_trim_csv,
    suggested_tau_aero_scale,
    trim_sweep,
    write_sweep_csv,
    write_trim_csv,
)
from app.api.utils.responses import FitNotConvergedError, ScenarioFileError, SimulationDivergenceError
from app.core import settings
from app.core.models import AeroParams, VehicleGeometry

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_NOT_CONVERGED = 3


class UsageError(Exception):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(data: dict, path: str) -> str:
    with open(path, "w") as file:
        json.dump(data, file, indent=2)
    logger.info(f"Summary written to {path}")
    return path


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def cmd_sim(args) -> int:
    output_dir = settings.ensure_output_dir(args.output_dir)
    csv_path = os.path.join(output_dir, f"{_stem(args.scenario)}.csv")
    summary_path = os.path.join(output_dir, f"{_stem(args.scenario)}_summary.json")
    try:
        log = run_scenario_file(args.scenario)
    except SimulationDivergenceError as e:
        if e.log is not None:
            e.log.to_csv(csv_path)
            e.log.write_summary(summary_path)
        raise
    log.to_csv(csv_path)
    log.write_summary(summary_path)
    print(f"{log.name}: altitude drift {log.summary['altitude_drift_m']:.2f} m, wrote {csv_path}")
    return EXIT_OK


def _run_one(scenario_path: str, output_dir: str) -> dict:
    try:
        log = run_scenario_file(scenario_path)
    except SimulationDivergenceError as e:
        return {"scenario": scenario_path, "exit_code": e.exit_code, "error": e.message}
    except ScenarioFileError as e:
        return {"scenario": scenario_path, "exit_code": e.exit_code, "error": e.message}
    csv_path = log.to_csv(os.path.join(output_dir, f"{_stem(scenario_path)}.csv"))
    log.write_summary(os.path.join(output_dir, f"{_stem(scenario_path)}_summary.json"))
    return {"scenario": scenario_path, "exit_code": EXIT_OK, "csv": csv_path, "summary": log.summary}


def cmd_batch(args) -> int:
    output_dir = settings.ensure_output_dir(args.output_dir)
    workers = args.workers or settings.workers
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_run_one, args.scenarios, [output_dir] * len(args.scenarios)))
    _write_json({"runs": results}, os.path.join(output_dir, "batch_summary.json"))
    for result in results:
        print(f"{result['scenario']}: exit {result['exit_code']}")
    return max(result["exit_code"] for result in results)


def load_grid_spec(path: str) -> SynthRequestDTO:
    try:
        with open(path, "rb") as file:
            data = tomllib.load(file)
        return SynthRequestDTO.model_validate(data)
    except (OSError, tomllib.TOMLDecodeError, ValidationError) as e:
        raise ScenarioFileError(f"Grid spec {path} cannot be used: {e}")


def cmd_sysid_synth(args) -> int:
    request = load_grid_spec(args.grid)
    seed = request.seed if args.seed is None else args.seed
    params = load_aero_params(args.params) if args.params else AeroParams()
    data = generate_synthetic_sweep(params, request.grid, request.noise, seed)
    out = args.out or os.path.join(settings.ensure_output_dir(), "sweep.csv")
    write_sweep_csv(data, out)
    print(f"{len(data)} samples written to {out}")
    return EXIT_OK


def cmd_sysid_fit(args) -> int:
    data = read_sweep_csv(args.sweep)
    initial = load_aero_params(args.initial) if args.initial else AeroParams()
    options = FitOptions(max_iterations=args.max_iterations, target_roll_slope=args.target_slope)
    result = fit(initial, data, options)

    out = args.out or os.path.join(settings.ensure_output_dir(), "aero_params.json")
    save_aero_params(result.params, out)
    summary = result.summary()
    if result.roll_slope is not None:
        summary["suggested_tau_aero_scale_Nm"] = suggested_tau_aero_scale(result.roll_slope, VehicleGeometry())
    _write_json(summary, f"{os.path.splitext(out)[0]}_fit.json")
    print(f"fit {result.stop_reason} after {result.iterations} iterations, converged={result.converged}")
    if not result.converged:
        raise FitNotConvergedError(f"Fit did not converge ({result.stop_reason}).", result=result)
    return EXIT_OK


def cmd_sysid_trim(args) -> int:
    geometry = VehicleGeometry()
    params = load_aero_params(args.params) if args.params else AeroParams()
    sweep = trim_sweep(np.linspace(geometry.chi_min, 0.5 * math.pi, args.points), params, geometry)
    out = args.out or os.path.join(settings.ensure_output_dir(), "trim.csv")
    write_trim_csv(sweep, out)
    print(f"{len(sweep)} trim points written to {out}")
    return EXIT_OK


def cmd_ffpoly_fit(args) -> int:
    coefficients = fit_thrust_ff(read_trim_csv(args.trim), VehicleGeometry())
    summary = {"thrust_ff_coefficients": list(coefficients)}
    if args.out:
        _write_json(summary, args.out)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_report(args) -> int:
    report = generate_report(args.log, args.output_dir, args.cruise_airspeed)
    for name, path in report["plots"].items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_alloc_check(args) -> int:
    report = allocation_round_trip(args.samples, args.seed)
    print(json.dumps(report))
    return EXIT_OK if report["passed"] else EXIT_USAGE


def cmd_serve(args) -> int:
    uvicorn.run(app="app.main:app", host=args.host or settings.service_host, port=args.port or settings.service_port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tiltwing", description="Tilt-wing tricopter simulation and identification tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("sim", help="run one scenario file")
    sim.add_argument("scenario")
    sim.add_argument("--output-dir")
    sim.set_defaults(handler=cmd_sim)

    batch = sub.add_parser("batch", help="run scenario files in parallel")
    batch.add_argument("scenarios", nargs="+")
    batch.add_argument("--output-dir")
    batch.add_argument("--workers", type=int)
    batch.set_defaults(handler=cmd_batch)

    sysid = sub.add_parser("sysid", help="model identification")
    sysid_sub = sysid.add_subparsers(dest="sysid_command", required=True, parser_class=_Parser)

    synth = sysid_sub.add_parser("synth", help="synthetic tunnel sweep from a grid spec")
    synth.add_argument("grid")
    synth.add_argument("--params")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--out")
    synth.set_defaults(handler=cmd_sysid_synth)

    fit_parser = sysid_sub.add_parser("fit", help="least-squares fit of the aero parameters")
    fit_parser.add_argument("sweep")
    fit_parser.add_argument("--initial")
    fit_parser.add_argument("--target-slope", type=float)
    fit_parser.add_argument("--max-iterations", type=int, default=500)
    fit_parser.add_argument("--out")
    fit_parser.set_defaults(handler=cmd_sysid_fit)

    trim = sysid_sub.add_parser("trim", help="level-flight trim sweep")
    trim.add_argument("--params")
    trim.add_argument("--points", type=int, default=33)
    trim.add_argument("--out")
    trim.set_defaults(handler=cmd_sysid_trim)

    ffpoly = sub.add_parser("ffpoly", help="thrust feed-forward polynomial")
    ffpoly_sub = ffpoly.add_subparsers(dest="ffpoly_command", required=True, parser_class=_Parser)
    ff_fit = ffpoly_sub.add_parser("fit")
    ff_fit.add_argument("trim")
    ff_fit.add_argument("--out")
    ff_fit.set_defaults(handler=cmd_ffpoly_fit)

    report = sub.add_parser("report", help="plots from a simulation log")
    report.add_argument("log")
    report.add_argument("--output-dir")
    report.add_argument("--cruise-airspeed", type=float, default=10.0)
    report.set_defaults(handler=cmd_report)

    alloc = sub.add_parser("alloc", help="allocation checks")
    alloc_sub = alloc.add_subparsers(dest="alloc_command", required=True, parser_class=_Parser)
    check = alloc_sub.add_parser("check", help="allocation round-trip property suite")
    check.add_argument("--samples", type=int, default=100_000)
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(handler=cmd_alloc_check)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=settings.log_level, format=settings.LOG_FORMAT, handlers=[logging.StreamHandler()])
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValidationError) as e:
        parser.print_usage(sys.stderr)
        logger.error(f"Input cannot be used: {e}")
        return EXIT_USAGE
    except HTTPException as e:
        parser.print_usage(sys.stderr)
        logger.error(f"Invalid input: {e.detail}")
        return EXIT_USAGE
    except Exception as e:
        exit_code = getattr(e, "exit_code", None)
        if exit_code is None:
            raise
        if exit_code == EXIT_USAGE:
            parser.print_usage(sys.stderr)
        logger.error(getattr(e, "message", str(e)))
        return exit_code


if __name__ == "__main__":
    sys.exit(main())
