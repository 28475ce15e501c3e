import argparse
import logging
import sys
from datetime import datetime, timezone
from time import perf_counter
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from .config import load_run_config
from .exceptions import ConfigError
from .export import ResultWriter, git_describe
from .scenarios import SCENARIOS, ScenarioRunner, worker_count

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNKNOWN_SCENARIO = 2
EXIT_UNWRITABLE_OUT = 3
EXIT_INVALID_CONFIG = 4


def run_scenario(config_path: Optional[str], scenario: str, out_dir: str,
                 overrides: Optional[Dict[str, Any]] = None) -> int:
    """Run one scenario and write its tables and manifest; returns the process exit status."""
    if scenario not in SCENARIOS:
        logger.error("Unknown scenario %r, choose from %s", scenario, ", ".join(SCENARIOS))
        return EXIT_UNKNOWN_SCENARIO
    try:
        params, run = load_run_config(config_path, overrides)
    except (ConfigError, ValidationError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_INVALID_CONFIG

    writer = ResultWriter(out_dir)
    try:
        writer.prepare()
    except OSError as e:
        logger.error("Output directory %s is not writable: %s", out_dir, e)
        return EXIT_UNWRITABLE_OUT

    threads = worker_count(run)
    started = datetime.now(timezone.utc)
    start = perf_counter()
    logger.info("Running %s with %d realizations, seed %d, %d thread(s)", scenario, run.realizations, run.seed,
                threads)
    result = SCENARIOS[scenario](ScenarioRunner(params, run, threads))
    wall = perf_counter() - start

    manifest = {
        "scenario": scenario,
        "seed": run.seed,
        "realizations": run.realizations,
        "params": params.model_dump(),
        "run": run.model_dump(),
        "git_describe": git_describe(),
        "started_at": started.isoformat(),
        "wall_time_s": wall,
        "threads": threads,
        "tables": [f"{t.name}.csv" for t in result.tables],
        "crossovers": result.crossovers,
        "summary": result.summary,
        "timings": result.timings,
    }
    try:
        for table in result.tables:
            writer.write_table(table.name, table.frame, table.columns)
        writer.write_manifest(manifest)
    except OSError as e:
        logger.error("Failed to write results to %s: %s", out_dir, e)
        return EXIT_UNWRITABLE_OUT
    logger.info("Finished %s in %.1f s", scenario, wall)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swipt-fog",
                                     description="SWIPT fog offloading scenarios, emitted as CSV plot data")
    parser.add_argument("scenario", choices=list(SCENARIOS), help="Experiment to run")
    parser.add_argument("--config", type=str, required=False,
                        help="Parameter file (key = value); SWIPT_FOG_* environment variables otherwise")
    parser.add_argument("--out", type=str, required=True, help="Directory for CSV tables and the manifest")
    parser.add_argument("--realizations", type=int, help="Monte Carlo realizations per point")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--grid-res", type=int, help="Placement grid resolution per axis")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the swipt-fog command."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = {key: value for key, value in
                 (("realizations", args.realizations), ("seed", args.seed), ("grid_res", args.grid_res))
                 if value is not None}
    return run_scenario(args.config, args.scenario, args.out, overrides)


if __name__ == "__main__":
    sys.exit(main())
