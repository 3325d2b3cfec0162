"""
Command-line driver for halfspace-kernels.

Subcommands:
    kernel          build a Poisson kernel and report its defining properties
    solve           solve the Dirichlet problem for a datum and report the trace
    verify          run the experiment suite of a run configuration
    spaces norm     evaluate a function-space norm of a field
    spaces boyd     estimate the Boyd indices of a rearrangement-invariant space
    maxop maximal   Hardy-Littlewood maximal function of a field
    maxop ap        Muckenhoupt A_p constant of a weight

Exit codes: 0 success (every experiment PASS), 1 an envelope was violated
or an experiment was skipped, 2 bad input or missing file, 3 numerical or
construction failure.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.errors import HalfSpaceError, InvalidGrid, MissingFile, SpecViolation
from core.grid import constant_field, indicator_interval, make_grid
from core.kernels import build_poisson, verify_poisson_properties
from core.maxop import ap_constant, hl_maximal, iterated_maximal, make_weight
from core.solver import auto_method, check_heights, default_heights, solve, trace_convergence
from core.spaces import boyd_indices, is_rearrangement_invariant, norm, spec_label
from core.systems import describe
from core.verification import DEFAULT_SUITE, EXPERIMENTS, run_suite
from data.config_manager import ConfigManager, EnvelopeRegistry
from data.field_store import (
    load_field,
    load_system,
    read_json,
    save_field,
    save_halfspace,
    save_kernel,
    save_reports,
    save_series_csv,
    spec_from_dict,
    spec_to_dict,
    to_jsonable,
    write_json,
)
from data.models import BoundaryField, ConeSpec, CubeFamily, DirichletProblem, KernelMethod


logger = logging.getLogger(__name__)

# Reference grids (R, N) per boundary dimension.
DEFAULT_GRIDS = {1: (64.0, 4096), 2: (16.0, 256)}
DEFAULT_ENVELOPES_PATH = Path(__file__).resolve().parent.parent / "envelopes.json"

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2


def _grid_for(dim: int, R: Optional[float], N: Optional[int]):
    default_R, default_N = DEFAULT_GRIDS[dim] if dim in DEFAULT_GRIDS else (64.0, 4096)
    return make_grid(dim, default_R if R is None else R, default_N if N is None else N)


def _method(name: str, sys) -> KernelMethod:
    return auto_method(sys) if name == "auto" else KernelMethod(name)


def _emit(payload: Dict[str, Any]) -> None:
    """Machine-readable result on stdout."""
    print(json.dumps(to_jsonable(payload), sort_keys=True))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_kernel(args: argparse.Namespace) -> int:
    """Build the kernel of a system, save its profile and property report."""
    system = load_system(args.system)
    if system.n - 1 not in DEFAULT_GRIDS:
        raise InvalidGrid(f"Systems in R^{system.n} have no boundary grid")
    grid = _grid_for(system.n - 1, args.R, args.N)
    method = _method(args.method, system)
    construction = build_poisson(system, grid, method)
    report = verify_poisson_properties(construction, system, extended=args.extended)
    report.update({"system": describe(system), "grid": grid.to_dict(), "kernel_method": method.value})

    output = Path(args.output)
    save_kernel(output / "kernel_profile.csv", construction.profile)
    write_json(output / "kernel_report.json", report)
    if args.plot:
        from ui.plotting import plot_kernel_profile

        plot_kernel_profile(construction.profile, output / "kernel_profile")
    _emit({"integral": report["integral"], "normalization_error": report["normalization_error"]})
    return EXIT_OK


def _datum(args: argparse.Namespace, system):
    if args.datum is not None:
        datum = load_field(args.datum)
        if datum.grid.n != system.n:
            raise SpecViolation(f"Datum grid is {datum.grid.dim}-dimensional, system lives in R^{system.n}")
        return datum
    grid = _grid_for(system.n - 1, args.R, args.N)
    if args.indicator is not None:
        a, b = args.indicator
        field = indicator_interval(grid, a, b)
        return BoundaryField(grid, np.repeat(field.values, system.M, axis=-1))
    values = args.constant if args.constant is not None else [1.0]
    if len(values) == 1:
        values = values * system.M
    if len(values) != system.M:
        raise SpecViolation(f"Constant datum needs 1 or {system.M} values, got {len(values)}")
    return constant_field(grid, values)


def cmd_solve(args: argparse.Namespace) -> int:
    """Solve for a datum file, a constant or an interval indicator."""
    system = load_system(args.system)
    datum = _datum(args, system)
    grid = datum.grid
    heights = check_heights(grid, args.heights) if args.heights else default_heights(grid)
    method = _method(args.method, system)
    u = solve(DirichletProblem(system, datum, heights, method))
    trace = trace_convergence(u, datum, ConeSpec(kappa=args.kappa))

    origin = [u.values[(index,) + grid.origin_index] for index in range(len(u.heights))]
    finite = bool(np.all(np.isfinite(u.values)))
    report = {
        "system": describe(system),
        "grid": grid.to_dict(),
        "kernel_method": method.value,
        "heights": list(u.heights),
        "origin_values": [np.real(v).tolist() for v in origin],
        "origin_values_imag": [np.imag(v).tolist() for v in origin],
        "trace": trace,
        "verdict": "PASS" if finite else "FAIL",
    }
    output = Path(args.output)
    save_halfspace(output / "solution.csv", u)
    write_json(output / "solve_report.json", report)
    if args.plot:
        from ui.plotting import plot_slices

        plot_slices(u, output / "solution")
    _emit({"verdict": report["verdict"], "heights": report["heights"], "origin_values": report["origin_values"]})
    return EXIT_OK if finite else EXIT_VIOLATION


def cmd_verify(args: argparse.Namespace) -> int:
    """Run the configured experiments and write per-experiment reports and the summary."""
    config_path = Path(args.config)
    if not config_path.exists():
        raise MissingFile(f"Config file {config_path} does not exist")
    manager = ConfigManager(config_path, known_experiments=list(EXPERIMENTS), default_experiments=DEFAULT_SUITE)
    config = manager.load_config()
    if args.jobs is not None:
        config.jobs = max(1, args.jobs)

    if args.envelopes:
        envelopes_path = Path(args.envelopes)
        if not envelopes_path.exists():
            raise MissingFile(f"Envelope file {envelopes_path} does not exist")
    else:
        envelopes_path = manager.base_dir / "envelopes.json"
        if not envelopes_path.exists():
            envelopes_path = DEFAULT_ENVELOPES_PATH
    registry = EnvelopeRegistry.load(envelopes_path)

    reports, summary = run_suite(config, registry, base_dir=str(manager.base_dir))
    output = Path(args.output) if args.output else manager.base_dir / config.output_dir
    save_reports(output, reports, summary)
    for report in reports:
        for key, values in _series(report.details).items():
            save_series_csv(output / f"{report.name}_{key}.csv", {key: values})
    if args.plot:
        from ui.plotting import plot_reports

        plot_reports(reports, output)

    _emit(summary)
    if summary["passed"]:
        logger.info(f"All {len(reports)} experiments passed")
        return EXIT_OK
    logger.warning(f"Verdicts: {summary['counts']}")
    return EXIT_VIOLATION


def _series(details: Dict[str, Any]) -> Dict[str, List[float]]:
    from ui.plotting import numeric_series

    return numeric_series(details)


def cmd_spaces_norm(args: argparse.Namespace) -> int:
    field = load_field(args.field)
    spec = spec_from_dict(read_json(args.spec), field.grid, Path(args.spec).parent)
    value = norm(field, spec)
    _emit({"spec": spec_to_dict(spec), "label": spec_label(spec), "norm": value if math.isfinite(value) else "inf"})
    return EXIT_OK


def cmd_spaces_boyd(args: argparse.Namespace) -> int:
    # Rearrangement-invariant specs need no grid; weighted ones are rejected below.
    grid = _grid_for(1, None, None)
    spec = spec_from_dict(read_json(args.spec), grid, Path(args.spec).parent)
    if not is_rearrangement_invariant(spec):
        raise SpecViolation(f"Boyd indices need a rearrangement-invariant space, got {spec_label(spec)}")
    p_x, q_x = boyd_indices(spec)
    _emit({"label": spec_label(spec), "p_X": p_x, "q_X": q_x})
    return EXIT_OK


def cmd_maxop_maximal(args: argparse.Namespace) -> int:
    field = load_field(args.field)
    family = CubeFamily(args.family)
    result = iterated_maximal(field, family) if args.iterate else hl_maximal(field, family)
    if args.output:
        save_field(args.output, result)
    values = np.real(result.values[..., 0])
    _emit({"max": float(values.max()), "at_origin": float(values[field.grid.origin_index])})
    return EXIT_OK


def cmd_maxop_ap(args: argparse.Namespace) -> int:
    weight = make_weight(load_field(args.weight), label=Path(args.weight).stem)
    report = ap_constant(weight, args.p, CubeFamily(args.family))
    _emit({"p": report.p, "constant": report.constant, "argmax_cube": report.argmax_cube})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--R", type=float, default=None, help="Grid half width")
    parser.add_argument("--N", type=int, default=None, help="Points per axis (power of two)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfspace-kernels",
        description="Poisson kernels and the Dirichlet problem for elliptic systems in the upper half-space.",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    methods = [m.value for m in KernelMethod] + ["auto"]

    kernel = commands.add_parser("kernel", help="Build a Poisson kernel and verify its properties")
    kernel.add_argument("--system", required=True, help="System JSON file")
    kernel.add_argument("--method", choices=methods, default="auto")
    kernel.add_argument("--output", default="output")
    kernel.add_argument("--extended", action="store_true", help="Add the Green function cross-check")
    kernel.add_argument("--plot", action="store_true")
    _add_grid_args(kernel)
    kernel.set_defaults(handler=cmd_kernel)

    solve_cmd = commands.add_parser("solve", help="Solve the Dirichlet problem")
    solve_cmd.add_argument("--system", required=True)
    datum = solve_cmd.add_mutually_exclusive_group()
    datum.add_argument("--datum", help="Field CSV")
    datum.add_argument("--constant", type=float, nargs="+", help="Constant datum (1 or M values)")
    datum.add_argument("--indicator", type=float, nargs=2, metavar=("A", "B"), help="1_[A,B) on a 1D grid")
    solve_cmd.add_argument("--heights", type=float, nargs="+")
    solve_cmd.add_argument("--method", choices=methods, default="auto")
    solve_cmd.add_argument("--kappa", type=float, default=1.0, help="Cone aperture for the trace report")
    solve_cmd.add_argument("--output", default="output")
    solve_cmd.add_argument("--plot", action="store_true")
    _add_grid_args(solve_cmd)
    solve_cmd.set_defaults(handler=cmd_solve)

    verify = commands.add_parser("verify", help="Run an experiment suite")
    verify.add_argument("--config", required=True)
    verify.add_argument("--envelopes", help="Envelope file (default: next to the config, else the bundled one)")
    verify.add_argument("--output", help="Report directory (default: the config's output_dir)")
    verify.add_argument("--jobs", type=int, default=None)
    verify.add_argument("--plot", action="store_true")
    verify.set_defaults(handler=cmd_verify)

    spaces = commands.add_parser("spaces", help="Function-space norms").add_subparsers(dest="action", required=True)
    spaces_norm = spaces.add_parser("norm")
    spaces_norm.add_argument("--spec", required=True)
    spaces_norm.add_argument("--field", required=True)
    spaces_norm.set_defaults(handler=cmd_spaces_norm)
    spaces_boyd = spaces.add_parser("boyd")
    spaces_boyd.add_argument("--spec", required=True)
    spaces_boyd.set_defaults(handler=cmd_spaces_boyd)

    maxop = commands.add_parser("maxop", help="Maximal operators and weights").add_subparsers(
        dest="action", required=True
    )
    maximal = maxop.add_parser("maximal")
    maximal.add_argument("--field", required=True)
    maximal.add_argument("--family", choices=[f.value for f in CubeFamily], default=CubeFamily.ALL.value)
    maximal.add_argument("--iterate", action="store_true", help="Apply M twice")
    maximal.add_argument("--output", help="Write M f as a field CSV")
    maximal.set_defaults(handler=cmd_maxop_maximal)
    ap = maxop.add_parser("ap")
    ap.add_argument("--weight", required=True)
    ap.add_argument("--p", type=float, required=True)
    ap.add_argument("--family", choices=[f.value for f in CubeFamily], default=CubeFamily.ALL.value)
    ap.set_defaults(handler=cmd_maxop_ap)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and map errors to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.getLogger().setLevel(args.log_level)
    try:
        return args.handler(args)
    except HalfSpaceError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
