import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.config import get_settings
from app.models.errors import ConfigError
from app.models.schemas import RunConfig
from app.services.experiment_service import ExperimentService, list_experiments, resolve_config, run_sweep, sweep_configs

logger = logging.getLogger("lie_tracking")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lie-tracking",
        description="Exponentially stable tracking on matrix Lie groups: simulation experiments",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the experiment described by a JSON config")
    run.add_argument("config", help="Path to the run config (JSON)")
    run.add_argument("--out", default=None, help="Output directory for metrics.csv, record.json and summary.json")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--k", type=float, default=None, help="Controller gain")
    run.add_argument("--dt", type=float, default=None, help="Time step")
    run.add_argument("--jobs", type=int, default=1, help="Worker processes for sweeps")

    sub.add_parser("list", help="List the built-in experiments and their defaults")
    sub.add_parser("schema", help="Print the JSON schema of run configs")
    return parser


def setup_logging(level: Optional[str] = None):
    level = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def load_config(path: str, args: argparse.Namespace) -> RunConfig:
    """Read the JSON file and apply command-line overrides before validation"""
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a JSON object")

    for name in ("seed", "k", "dt", "out"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return RunConfig.model_validate(data)


def cmd_run(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = load_config(args.config, args)
        resolve_config(config)
        if config.sweep:
            sweep_configs(config)
    except (ValidationError, ConfigError) as exc:
        logger.error("Invalid config: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(config.out or Path(get_settings().output_dir) / config.experiment)
    if config.sweep:
        result = run_sweep(config, out_dir, jobs=args.jobs)
        return EXIT_OK if result["passed"] else EXIT_RUNTIME

    summary = ExperimentService(config, out_dir).run()
    if summary["status"] == "aborted":
        return EXIT_RUNTIME
    return EXIT_OK if summary["passed"] else EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    setup_logging(args.log_level)

    if args.command == "list":
        print(list_experiments())
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(RunConfig.model_json_schema(), indent=2))
        return EXIT_OK
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
