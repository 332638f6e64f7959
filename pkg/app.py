"""
dqpt-lab - Command-line entry point
"""
import argparse
import logging
import sys
import time
from typing import Callable, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import ValidationError

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger("dqpt_lab")

from src import __version__
from src.physics.entanglement import collapse_windows, entanglement_dynamics, fluctuation_scan
from src.physics.exact import MAX_SITES, oracle_suite
from src.physics.loschmidt import compare_detectors, cusp_times, find_critical_times, rate_function, scan_region
from src.physics.model import MomentumGrid
from src.physics.phase import phase_diagram
from src.utils.config import COMMANDS, RunConfig, build_config, load_config
from src.utils.data_processing import axis_values, normalize_table, scan_summary, split_errors, time_grid
from src.utils.errors import EXIT_OK, ConfigError, DqptLabError, OracleFailure, exit_code_for
from src.utils.formatting import ResultEnvelope, build_metadata, write_result
from src.utils.parallel import resolve_threads, set_progress

Handler = Callable[[RunConfig, int], Tuple[pd.DataFrame, Dict]]

ORACLE_SIZE = 8


def _axes(config: RunConfig):
    return (
        axis_values(config.x_min, config.x_max, config.nx),
        axis_values(config.y_min, config.y_max, config.ny),
    )


def run_phase_diagram(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    xs, ys = _axes(config)
    table = phase_diagram(config.plane, xs, ys, config.gamma, config.plane_fixed(), config.n_modes)
    return table, {"grid": {"nx": config.nx, "ny": config.ny, "n_modes": config.n_modes}}


def run_rate_function(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    q = config.quench()
    grid = MomentumGrid.midpoint(config.n_modes)
    series = rate_function(q, grid, time_grid(config.t_max, config.dt))
    critical = find_critical_times(q, grid, config.t_max, config.eps_crit, config.dt)
    disagreement = compare_detectors(series, critical)
    extra = {
        "n_times": int(series.times.size),
        "cusp_times": cusp_times(series),
        "critical_times": critical.times.tolist(),
        "detector_disagreement": disagreement,
    }
    return series.to_frame(), extra


def run_critical_times(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    critical = find_critical_times(
        config.quench(), MomentumGrid.midpoint(config.n_modes), config.t_max, config.eps_crit, config.dt
    )
    return critical.to_frame(), {"spacing_stats": critical.spacing_stats, "count": len(critical)}


def run_dqpt_scan(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    xs, ys = _axes(config)
    table = scan_region(
        config.initial(), config.plane, xs, ys, config.plane_fixed(),
        config.t_max, config.n_modes, config.eps_crit, config.dt, threads,
    )
    table, errors = split_errors(table)
    violations = table[table["dqpt"] & ~table["crosses"]]
    extra = {
        "grid": {"nx": config.nx, "ny": config.ny, "n_modes": config.n_modes},
        "summary": scan_summary(table, "dqpt"),
        "violation_count": int(len(violations)),
        "violations": [f"DQPT without boundary crossing at ({r.x!r}, {r.y!r})" for r in violations.itertuples()],
        "failed_points": errors,
    }
    return table, extra


def run_entanglement_dynamics(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    times = time_grid(config.t_max, config.dt)
    series = entanglement_dynamics(config.quench(), config.size, times, engine=config.engine)
    extra = {
        "size": config.size,
        "engine": config.engine,
        "n_times": int(times.size),
        "collapse_windows": collapse_windows(series.times, series.logneg),
    }
    return series.to_frame(), extra


def run_ggm_scan(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    xs, ys = _axes(config)
    table = fluctuation_scan(
        config.initial(), config.plane, xs, ys, config.plane_fixed(),
        config.tau, config.engine, config.size, config.dt, threads,
    )
    table, errors = split_errors(table)
    extra = {
        "grid": {"nx": config.nx, "ny": config.ny},
        "size": config.size,
        "engine": config.engine,
        "failed_points": errors,
    }
    return table, extra


def run_oracle_check(config: RunConfig, threads: int) -> Tuple[pd.DataFrame, Dict]:
    size = config.size if config.size <= MAX_SITES else ORACLE_SIZE
    table = oracle_suite(size)
    failed = table.loc[~table["passed"], "check"].tolist()
    return table, {"size": size, "violations": [f"oracle check {name} failed" for name in failed]}


HANDLERS: Dict[str, Handler] = {
    "phase-diagram": run_phase_diagram,
    "rate-function": run_rate_function,
    "critical-times": run_critical_times,
    "dqpt-scan": run_dqpt_scan,
    "entanglement-dynamics": run_entanglement_dynamics,
    "ggm-scan": run_ggm_scan,
    "oracle-check": run_oracle_check,
}


def run(config: RunConfig, threads: int = 0) -> ResultEnvelope:
    """
    Execute the configured command.

    Args:
        config: Validated configuration
        threads: Resolved worker count

    Returns:
        ResultEnvelope with the normalized payload and metadata
    """
    logger.info(f"Starting {config.command} (dqpt-lab {__version__}, threads={threads})")
    start = time.perf_counter()
    table, extra = HANDLERS[config.command](config, threads)
    elapsed = time.perf_counter() - start
    payload = normalize_table(table, config.command)
    metadata = build_metadata(config.command, config.model_dump(), elapsed, extra)
    logger.info(f"Finished {config.command}: {len(payload)} rows in {elapsed:.2f} s")
    return ResultEnvelope(command=config.command, payload=payload, metadata=metadata)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqpt-lab",
        description="Loschmidt echoes, critical times and entanglement after quenches of the DATXY chain.",
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="Command; overrides the config file")
    parser.add_argument("--config", help="Flat key = value file, or .json")
    parser.add_argument("--out", help="Output path; stdout when omitted")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--threads", type=int)
    parser.add_argument("--t-max", dest="t_max", type=float)
    parser.add_argument("--n-modes", dest="n_modes", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--eps-crit", dest="eps_crit", type=float)
    parser.add_argument("--size", type=int)
    parser.add_argument(
        "--set", dest="assignments", action="append", default=[], metavar="KEY=VALUE",
        help="Override any configuration key; repeatable",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings only, no progress bars")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def collect_values(args: argparse.Namespace) -> Dict:
    """Merge the config file, ``--set`` assignments and dedicated flags, in that order."""
    values = load_config(args.config) if args.config else {}
    for assignment in args.assignments:
        if "=" not in assignment:
            raise ConfigError("--set", f"expected KEY=VALUE, got {assignment!r}")
        key, value = (part.strip() for part in assignment.split("=", 1))
        values[key] = value
    for key in ("command", "out", "format", "t_max", "n_modes", "tau", "eps_crit", "size"):
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    return values


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI.

    Args:
        argv: Arguments without the program name; ``sys.argv[1:]`` when None

    Returns:
        Exit code: 0 on success, 2 on invalid configuration, 3 on numerical failure
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)
    set_progress(not args.quiet)

    try:
        config = build_config(collect_values(args))
        threads = resolve_threads(args.threads, config.threads)
        if threads < 0:
            raise ConfigError("threads", f"must be non-negative, got {threads}")
        envelope = run(config, threads)
        write_result(envelope, config.out, config.format)
        violations = envelope.metadata.get("violations", [])
        if config.command == "oracle-check" and violations:
            raise OracleFailure(", ".join(violations))
    except (DqptLabError, ValidationError, ValueError, ArithmeticError) as e:
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
