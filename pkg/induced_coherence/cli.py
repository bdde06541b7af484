"""
Command-line interface for the induced-coherence toolkit.
"""

import argparse
import csv
import logging
import sys
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO

from . import counting_sim, validation
from .bridge import Config, InterferometerBridge
from .config import load_config
from .errors import InterferometerError
from .models import DetectionParams, ExperimentParams, SweepSpec

logger = logging.getLogger(__name__)

COMMANDS = ("analytic", "engine", "oracle", "mc", "validate")

INT_FIELDS = {"rng_seed", "trials"}
STR_FIELDS = {"coincidence_mode"}


def format_value(value: Any) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(stream: TextIO, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(value) for value in row])


@contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as stream:
            yield stream


def _field_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("parameter overrides")
    for name in list(ExperimentParams.model_fields) + ["v2"]:
        group.add_argument(f"--{name}", type=float, default=None)
    for name in DetectionParams.model_fields:
        if name == "rng_seed":
            continue
        kind = int if name in INT_FIELDS else str if name in STR_FIELDS else float
        group.add_argument(f"--{name}", type=kind, default=None)
    group.add_argument(
        "--seed", "--rng_seed", dest="rng_seed", type=int, default=None,
        help="Monte Carlo seed (unsigned 64-bit)",
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [experiment]/[detection] sections")
    common.add_argument("--out", help="Write CSV here instead of stdout")
    common.add_argument(
        "--sweep", help="Sweep descriptor <var>:<start>:<stop>:<n>[:log], var in t_mag, v2, gamma_mag"
    )
    common.add_argument("--cutoff", type=int, default=None, help="Oracle photon cutoff per mode")
    common.add_argument("--workers", type=int, default=1, help="Parallel sweep workers")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    _field_options(common)

    parser = argparse.ArgumentParser(
        prog="induced-coherence",
        description="Induced coherence and distinguishability in a two-crystal interferometer",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    subparsers.add_parser("analytic", parents=[common], help="Closed-form table")
    subparsers.add_parser("engine", parents=[common], help="Gaussian moment engine table")
    subparsers.add_parser("oracle", parents=[common], help="Truncated Fock-space table")
    mc_parser = subparsers.add_parser("mc", parents=[common], help="Coincidence Monte Carlo table")
    mc_parser.add_argument(
        "--histogram-out", dest="histogram_out", help="Write the delay scans here"
    )
    mc_parser.add_argument(
        "--calibration",
        choices=("reference", "none"),
        default="reference",
        help="Source and detector settings under the config file (default: reference)",
    )
    validate_parser = subparsers.add_parser(
        "validate", parents=[common], help="Run the acceptance checks"
    )
    validate_parser.add_argument("--quick", action="store_true", help="Fast checks only")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    names = list(ExperimentParams.model_fields) + ["v2"] + list(DetectionParams.model_fields)
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _sweep_spec(args: argparse.Namespace, fixed: ExperimentParams) -> SweepSpec:
    if args.sweep:
        return SweepSpec.from_descriptor(args.sweep, fixed, args.out)
    return SweepSpec(variable="t_mag", grid=[fixed.t_mag], fixed=fixed, output_path=args.out)


def _run(args: argparse.Namespace) -> int:
    base = None
    if getattr(args, "calibration", "none") == "reference":
        calibration = counting_sim.reference_calibration()
        base = (calibration.params, calibration.detection)
    params, det = load_config(args.config, _overrides(args), base)
    config = Config(workers=args.workers)
    if args.cutoff is not None:
        config.cutoff = args.cutoff
    bridge = InterferometerBridge(config)

    if args.command == "validate":
        results = validation.run_checks(quick=args.quick)
        print(validation.format_table(results))
        return 0 if all(r.passed for r in results) else 1

    spec = _sweep_spec(args, params)
    if args.command == "mc":
        columns, rows, scans = bridge.mc_sweep(spec, det)
        if args.histogram_out:
            histogram_rows: List[Sequence[Any]] = []
            for h13, h23 in scans:
                histogram_rows.extend(counting_sim.histogram_rows(h13))
                histogram_rows.extend(counting_sim.histogram_rows(h23))
            with _output(args.histogram_out) as stream:
                write_csv(stream, counting_sim.HISTOGRAM_COLUMNS, histogram_rows)
    else:
        columns, rows = bridge.sweep(args.command, spec, det, args.cutoff)
    with _output(args.out) as stream:
        write_csv(stream, columns, rows)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 0

    _configure_logging(args.verbose)
    try:
        return _run(args)
    except InterferometerError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
