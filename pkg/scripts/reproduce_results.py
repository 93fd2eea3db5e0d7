#!/usr/bin/env python3
"""
Reproduction recipes built on the shipped configurations.

Subcommands
-----------
list           Show every recipe with its configuration and experiments.
run            Run one recipe (or all of them) through the wqed2d command line.
period-table   Oscillation periods of the size scan against the Bloch-momentum law.

Run from the repository root: python -m scripts.reproduce_results <command>
"""

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

import main as cli
from common.types.ExperimentConfig import ExperimentConfig, ExperimentName
from common.wqed.errors import InvalidInputError, WaveguideError
from common.wqed.model import single_port_input
from common.wqed.qgh import oscillation_period, predicted_period, size_scan
from common.wqed.transfer_oracle import resonant_kx

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@dataclass(frozen=True)
class Recipe:
    name: str
    config: str
    experiments: Tuple[ExperimentName, ...]
    description: str


RECIPES = [
    Recipe("ratio_collapse", "ratio_collapse.json", (ExperimentName.RATIO_SCAN,),
           "vertical/horizontal ratio collapse at small decay-rate ratio"),
    Recipe("gap_suppression", "gap_suppression.json", (ExperimentName.SIZE_SCAN,),
           "in-gap decay of transmission and saturation of reflection with lattice length"),
    Recipe("port_sweep", "port_sweep.json", (ExperimentName.SWEEP, ExperimentName.SPECTRUM),
           "port-resolved probabilities and shifts, with subradiant frequencies"),
    Recipe("ky_heatmap", "ky_heatmap.json", (ExperimentName.KY_SCAN,),
           "beam-shift map over frequency and transverse momentum"),
    Recipe("gaussian_shift", "gaussian_shift_sweep.json", (ExperimentName.SWEEP,),
           "real-space against momentum-space shifts of a Gaussian beam"),
    Recipe("scale_free_chain", "scale_free_chain.json", (ExperimentName.SCALE_FREE,),
           "scale-free edge states of the inverse chain"),
    Recipe("scale_free_square", "scale_free_square.json", (ExperimentName.SCALE_FREE,),
           "scale-free corner states of the inverse square"),
    Recipe("oracle_one_atom", "oracle_one_atom.json", (ExperimentName.ORACLE_CHECK,),
           "one atom: resolvent against network"),
    Recipe("oracle_two_atoms", "oracle_two_atoms.json", (ExperimentName.ORACLE_CHECK,),
           "two atoms: resolvent against network"),
    Recipe("oracle_2x2", "oracle_2x2.json", (ExperimentName.ORACLE_CHECK,), "2x2 atoms: resolvent against network"),
    Recipe("ribbon_oscillation", "ribbon_oscillation.json", (ExperimentName.SIZE_SCAN, ExperimentName.RIBBON_BANDS),
           "damped oscillation with lattice length and the ribbon bands behind it"),
    Recipe("oracle_random", "oracle_random.json", (ExperimentName.ORACLE_CHECK,),
           "a 4x3 lattice with unequal couplings"),
]

# (detuning, k_x / pi, reference period) for the 100 x 5 lattice of ribbon_oscillation.json
PERIOD_ROWS = [
    (8.3442, 1 / 8, 7.7),
    (14.0106, 1 / 7, 7.143),
    (-9.0688, 1 / 5, 5.0),
    (-3.445, 1 / 4, 4.0),
    (-1.6642, 1 / 3, 3.03),
    (-0.6642, 2 / 3, 3.03),
    (-0.6160, 3 / 4, 4.0),
    (-0.5967, 4 / 5, 5.0),
    (-0.5821, 6 / 7, 7.143),
    (-0.5775, 7 / 8, 8.33),
]


def find_recipe(name: str) -> Optional[Recipe]:
    return next((recipe for recipe in RECIPES if recipe.name == name), None)


# ---------------------------------------------------------------------------
# list
# ---------------------------------------------------------------------------

def list_recipes() -> None:
    print(f"{'recipe':<20} {'config':<26} {'experiments':<26} description")
    print("-" * 110)
    for recipe in RECIPES:
        experiments = ",".join(experiment.value for experiment in recipe.experiments)
        print(f"{recipe.name:<20} {recipe.config:<26} {experiments:<26} {recipe.description}")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def run_recipe(recipe: Recipe, out_dir: Optional[Path], threads: Optional[int], quiet: bool) -> int:
    status = 0
    for experiment in recipe.experiments:
        argv = [experiment.value, "--config", str(CONFIG_DIR / recipe.config)]
        if out_dir is not None:
            argv += ["--out", str(out_dir / f"{recipe.name}_{experiment.value}")]
        if threads is not None:
            argv += ["--threads", str(threads)]
        if quiet:
            argv.append("--quiet")
        print(f"== {recipe.name}: wqed2d {' '.join(argv)}")
        code = cli.main(argv)
        if code != 0:
            print(f"   exit code {code}")
            status = status or code
    return status


# ---------------------------------------------------------------------------
# period-table
# ---------------------------------------------------------------------------

def period_table(measure: bool, threads: int) -> List[dict]:
    config = ExperimentConfig.model_validate(cli.loadDocument(str(CONFIG_DIR / "ribbon_oscillation.json")))
    lattice = config.lattice.toLattice()
    settings = config.size_scan
    sizes = list(range(settings.n_x_min, settings.n_x_max + 1))
    rows = []
    for detuning, k_over_pi, reference in tqdm(PERIOD_ROWS, desc="period-table", disable=not measure):
        omega = lattice.omega_at(detuning)
        row = {"detuning": detuning, "k_x/pi": k_over_pi, "reference": reference,
               "resonant k_x/pi": np.nan, "predicted": np.nan, "measured": np.nan}
        try:
            k_x = resonant_kx(lattice, omega)
            row["resonant k_x/pi"] = k_x / np.pi
            row["predicted"] = predicted_period(k_x)
        except InvalidInputError as e:
            logger.warning("detuning %r: %s", detuning, e)
        if measure:
            try:
                photon = single_port_input(lattice.with_size(n_x=sizes[0]), omega, settings.ports[0])
                scan = size_scan(lattice, sizes, photon, omega, threads=threads)
                found = oscillation_period(scan.s_x)
                if found.period is not None:
                    row["measured"] = found.period
            except WaveguideError as e:
                logger.warning("detuning %r: size scan failed: %s", detuning, e)
        rows.append(row)
    return rows


def print_period_table(rows: List[dict]) -> None:
    columns = ["detuning", "k_x/pi", "resonant k_x/pi", "reference", "predicted", "measured"]
    print("  ".join(f"{column:>16}" for column in columns))
    print("-" * (18 * len(columns)))
    for row in rows:
        print("  ".join(f"{row[column]:>16.6g}" for column in columns))


def main() -> None:
    parser = argparse.ArgumentParser(
        description='Reproduce the reference datasets from the shipped configurations.',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m scripts.reproduce_results list
  python -m scripts.reproduce_results run port_sweep --threads 8
  python -m scripts.reproduce_results run all --out-dir results/all --quiet
  python -m scripts.reproduce_results period-table --measure
""",
    )
    sub = parser.add_subparsers(dest='command')

    # ---- list ----
    sub.add_parser('list', help='Show the available recipes.')

    # ---- run ----
    run_p = sub.add_parser('run', help='Run a recipe through the wqed2d command line.')
    run_p.add_argument('recipe', help="Recipe name from 'list', or 'all'.")
    run_p.add_argument('--out-dir', type=Path, default=None,
                       help='Directory for result tables (default: the output path of each config).')
    run_p.add_argument('--threads', type=int, default=None, help='Worker threads per sweep.')
    run_p.add_argument('--quiet', action='store_true', help='Hide progress bars.')

    # ---- period-table ----
    per_p = sub.add_parser('period-table', help='Tabulate oscillation periods against max(pi/k, pi/(pi-k)).')
    per_p.add_argument('--measure', action='store_true',
                       help='Also run the 100-length size scan for each row (slow).')
    per_p.add_argument('--threads', type=int, default=1, help='Worker threads for the size scans.')

    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format=cli.LOG_FORMAT)

    if args.command == 'list':
        list_recipes()

    elif args.command == 'run':
        recipes = RECIPES if args.recipe == 'all' else [find_recipe(args.recipe)]
        if recipes == [None]:
            parser.error(f"unknown recipe '{args.recipe}'")
        status = 0
        for recipe in recipes:
            code = run_recipe(recipe, args.out_dir, args.threads, args.quiet)
            status = status or code
        raise SystemExit(status)

    elif args.command == 'period-table':
        print_period_table(period_table(args.measure, args.threads))

    else:
        parser.print_help()


if __name__ == '__main__':
    main()
