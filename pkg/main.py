#!/usr/bin/env python3
"""
wqed2d: single-photon scattering experiments on a 2D atom array threaded by
crossed waveguides.

Each subcommand runs one experiment from a JSON (or YAML) configuration and
writes one file per result table next to the output base path.

Exit codes
----------
0  success
1  the run finished but failed a check (oracle mismatch) or hit another solver error
2  configuration or schema error
3  unrecoverable solver pole
4  I/O failure
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import orjson
import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from common.types.ExperimentConfig import ExperimentConfig, ExperimentName, OutputFormat, errorLocation, hasPath
from common.utils.experiments import provenanceFor, tablePath
from common.utils.misc import applyOverrides
from common.wqed.errors import (ConfigError, InvalidInputError, InvalidLatticeError, NearSingularMomentumError,
                                OutputError, PoleError, SingularNetworkError, WaveguideError)
from simulation.events import EventType, TableWrittenData
from simulation.experiments import ExperimentRunner
from simulation.observers import EventManager
from simulation.sim import SweepObserver

logger = logging.getLogger("wqed2d")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_POLE = 3
EXIT_IO = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def loadDocument(path: str) -> Dict[str, Any]:
    config_path = Path(path)
    try:
        text = config_path.read_bytes()
    except OSError as e:
        raise OutputError(str(config_path), e) from e
    try:
        if config_path.suffix in (".yaml", ".yml"):
            document = yaml.safe_load(text)
        else:
            document = orjson.loads(text)
    except (orjson.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {config_path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{config_path} does not hold a configuration object")
    return document


def resolveThreads(threads: Optional[int]) -> int:
    if threads is not None:
        if threads < 1:
            raise ConfigError(f"--threads must be positive, got {threads}", field="threads")
        return threads
    value = os.environ.get("WQED2D_THREADS")
    if not value:
        return 1
    try:
        resolved = int(value)
    except ValueError:
        raise ConfigError(f"WQED2D_THREADS must be an integer, got '{value}'", field="WQED2D_THREADS")
    if resolved < 1:
        raise ConfigError(f"WQED2D_THREADS must be positive, got {resolved}", field="WQED2D_THREADS")
    return resolved


def resolveConfig(path: str, experiment: str, overrides: List[str]) -> ExperimentConfig:
    document = loadDocument(path)
    document["experiment"] = experiment
    applyOverrides(document, overrides, hasPath=hasPath)
    return ExperimentConfig.model_validate(document)


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

def classify(error: Exception) -> Tuple[int, Optional[str]]:
    if isinstance(error, ValidationError):
        first = error.errors()[0]
        return EXIT_CONFIG, errorLocation(first["loc"])
    if isinstance(error, (ConfigError, InvalidLatticeError, InvalidInputError)):
        return EXIT_CONFIG, error.field
    if isinstance(error, (PoleError, SingularNetworkError, NearSingularMomentumError)):
        return EXIT_POLE, None
    if isinstance(error, OutputError):
        return EXIT_IO, error.path
    return EXIT_FAILED, getattr(error, "field", None)


def reportError(error: Exception) -> int:
    code, field = classify(error)
    if isinstance(error, ValidationError):
        first = error.errors()[0]
        message = f"{field}: {first['msg']}"
    else:
        message = str(error)
    report = {"error": type(error).__name__, "message": message, "exit_code": code, "field": field}
    sys.stderr.write(orjson.dumps(report).decode("utf-8") + "\n")
    return code


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def run(args: argparse.Namespace) -> int:
    config = resolveConfig(args.config, args.experiment, args.override)
    threads = resolveThreads(args.threads)
    document = config.model_dump(mode="json")
    provenance = provenanceFor(document, config.experiment.value)
    logger.info("config %s (sha256 %s), %d thread(s)", args.config, provenance.config_sha256[:12], threads)

    eventManager = EventManager()
    observer = SweepObserver(eventManager, quiet=args.quiet)
    runner = ExperimentRunner(config, provenance, eventManager, threads)
    tables = runner.run()

    base = args.out or config.outputPath()
    fmt = OutputFormat.JSON if base.endswith(".json") else config.output.format
    for table in tables:
        path = table.save(tablePath(base, table.name, fmt.value), fmt.value)
        eventManager.notify(EventType.TABLE_WRITTEN, TableWrittenData(table.name, str(path), len(table.rows)))
        print(path)

    if runner.failed:
        logger.error("%s reported a failed check; see %s", config.experiment.value, observer.written[-1])
        return EXIT_FAILED
    return EXIT_OK


def buildParser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wqed2d",
        description="Single-photon scattering experiments on crossed-waveguide atom arrays.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  wqed2d sweep --config configs/port_sweep.json
  wqed2d ky_scan --config configs/ky_heatmap.json --override ky_scan.sigma=4 --threads 8
  wqed2d size_scan --config configs/ribbon_oscillation.json --override size_scan.detuning=8.3442 --out results/s5
  wqed2d oracle_check --config configs/oracle_one_atom.json
""",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON or YAML configuration document.")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="Set a dotted configuration key, e.g. sweep.ky=0.1pi (repeatable).")
    common.add_argument("--threads", type=int, default=None,
                        help="Worker threads for sweeps (default: $WQED2D_THREADS or 1).")
    common.add_argument("--out", default=None,
                        help="Output base path; tables are written as <base>_<table>.<csv|json>.")
    common.add_argument("--log-level", default=os.environ.get("WQED2D_LOG_LEVEL", "INFO"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper,
                        help="Logging level (default: $WQED2D_LOG_LEVEL or INFO).")
    common.add_argument("--quiet", action="store_true", help="Hide the progress bar.")

    sub = parser.add_subparsers(dest="experiment", required=True)
    helps = {
        ExperimentName.SCATTER: "Port amplitudes and atomic excitation at one frequency.",
        ExperimentName.SWEEP: "Output probabilities and beam shifts over a frequency grid.",
        ExperimentName.SIZE_SCAN: "Forward/backward totals against lattice length and their oscillation period.",
        ExperimentName.RATIO_SCAN: "Vertical/horizontal output ratio against the decay-rate ratio.",
        ExperimentName.KY_SCAN: "Beam-shift heatmap over frequency and transverse momentum.",
        ExperimentName.SPECTRUM: "Eigenvalues and participation ratios of the effective Hamiltonian.",
        ExperimentName.SCALE_FREE: "Scale-free states of the inverse chain or square.",
        ExperimentName.RIBBON_BANDS: "Band structure of the ribbon geometry.",
        ExperimentName.ORACLE_CHECK: "Cross-check the resolvent solver against the transfer-matrix network.",
    }
    for experiment in ExperimentName:
        sub.add_parser(experiment.value, parents=[common], help=helps[experiment])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = buildParser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        return run(args)
    except (ValidationError, WaveguideError) as e:
        logger.debug("run failed", exc_info=True)
        return reportError(e)
    except OSError as e:
        return reportError(OutputError(getattr(e, "filename", None) or "", e))


if __name__ == "__main__":
    sys.exit(main())
