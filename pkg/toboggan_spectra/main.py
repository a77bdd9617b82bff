import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from toboggan_spectra.contour import ContourSpec, endpoints, sample, verify_pt_geometry
from toboggan_spectra.data_loader import TableLoader
from toboggan_spectra.integrator import IntegratorConfig
from toboggan_spectra.perturbation import (
    FirstOrderCoefficient,
    first_order_energy,
    harmonic_log_moment,
)
from toboggan_spectra.potential import PotentialSpec, values, verify_pt_potential
from toboggan_spectra.rootfind import RootConfig
from toboggan_spectra.shooting import mismatch_batch
from toboggan_spectra.spectrum import (
    DEFAULT_E_MIN,
    ROW_COLUMNS,
    ExceptionalPoint,
    PredicateNoisy,
    SolverConfig,
    SpectralTable,
    locate_exceptional,
    pair_events,
    solve_column,
    sweep,
    sweep_epsilons,
    track,
)
from toboggan_spectra.utils import CsvStream, save_json, write_table

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_NO_ROOTS = 2
EXIT_USAGE = 64

JOBS_ENV = "TOBOGGAN_JOBS"


def setup_logging(log_dir: Optional[Path] = None, verbose: bool = False) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_dir / "toboggan.log"))

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
    )


def _resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is not None:
        return jobs
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    command: str
    epsilon: Optional[float] = None
    winding: int = 0
    n_max: int = 6
    e_min: Optional[float] = None
    e_max: Optional[float] = None
    e_step: float = 0.05
    eps_from: Optional[float] = None
    eps_to: Optional[float] = None
    eps_step: float = 0.05

    # Solver settings
    dt: float = 1e-3
    renorm_threshold: float = 1e100
    tail_extent: float = 10.0
    grid_step: float = 0.05
    tol: float = 1e-10
    min_logmag: float = 16.0
    max_jump: float = 1.0
    jobs: Optional[int] = None
    refine: bool = False
    samples: int = 1001

    # Files and logging
    input: Optional[Path] = None
    output: Optional[Path] = None
    ep_output: Optional[Path] = None
    format: str = "csv"
    verbose: bool = False
    log_dir: Optional[Path] = None

    def __post_init__(self):
        """Validation logic for the dataclass attributes."""
        if self.winding < 0:
            raise ValueError(f"lambda must be non-negative, got {self.winding}")

        min_levels = 0 if self.command == "perturb" else 1
        if self.n_max < min_levels:
            raise ValueError(f"n must be at least {min_levels}, got {self.n_max}")

        if self.format not in {"csv", "json"}:
            raise ValueError(f"format must be 'csv' or 'json', got {self.format}")

        if self.samples < 2:
            raise ValueError(f"samples must be at least 2, got {self.samples}")

        if not self.e_step > 0:
            raise ValueError(f"estep must be positive, got {self.e_step}")

        if self.e_min is not None and self.e_max is not None and not self.e_min < self.e_max:
            raise ValueError(f"emin must be below emax, got [{self.e_min}, {self.e_max}]")

        self.jobs = _resolve_jobs(self.jobs)
        self.resolve_paths()

        if self.command in {"solve", "sweep", "mismatch"}:
            self.solver_config()
        if self.command in {"solve", "mismatch"}:
            PotentialSpec(self.epsilon).require_solver_range()
        if self.command == "contour" and self.epsilon is not None:
            PotentialSpec(self.epsilon)
        if self.command == "sweep":
            sweep_epsilons(self.eps_from, self.eps_to, self.eps_step, self.winding)

    def resolve_paths(self) -> None:
        """Ensures all paths are Path objects."""
        self.input = Path(self.input) if self.input else None
        self.output = Path(self.output) if self.output else None
        self.ep_output = Path(self.ep_output) if self.ep_output else None
        self.log_dir = Path(self.log_dir) if self.log_dir else None

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            tail_extent=self.tail_extent,
            integrator=IntegratorConfig(dt=self.dt, renorm_threshold=self.renorm_threshold),
            grid_step=self.grid_step,
            tol=self.tol,
            min_logmag=self.min_logmag,
            max_jump=self.max_jump,
            jobs=self.jobs,
        )

    def window(self):
        if self.e_min is None and self.e_max is None:
            return None
        e_min = DEFAULT_E_MIN if self.e_min is None else self.e_min
        e_max = 2.0 * self.n_max + 6.0 if self.e_max is None else self.e_max
        return e_min, e_max


def cmd_solve(config: RunConfig) -> int:
    """Real eigenvalues at one (epsilon, lambda)."""
    try:
        column = solve_column(
            config.epsilon,
            config.winding,
            config.n_max,
            cfg=config.solver_config(),
            window=config.window(),
        )
    except ArithmeticError as error:
        logging.error(f"Numerical failure at epsilon={config.epsilon}: {error}")
        return EXIT_NUMERIC

    frame = pd.DataFrame(
        {
            "epsilon": [column.epsilon] * column.found_count,
            "lambda": [column.winding] * column.found_count,
            "index": list(range(column.found_count)),
            "energy": column.energies,
        }
    )
    write_table(frame, config.output, config.format)
    if not column.energies:
        logging.warning(
            f"No real eigenvalues found for epsilon={config.epsilon}, lambda={config.winding}"
        )
        return EXIT_NO_ROOTS
    if column.found_count < config.n_max:
        logging.info(f"Found {column.found_count} of {config.n_max} requested eigenvalues")
    return EXIT_OK


def _exceptional_points(
    table: SpectralTable, config: RunConfig, cfg: SolverConfig
) -> List[ExceptionalPoint]:
    points = []
    for event in pair_events(table):
        if not config.refine:
            points.append(event.to_exceptional(config.winding))
            continue
        try:
            points.append(
                locate_exceptional(
                    config.winding,
                    event.pair,
                    (event.eps_lo, event.eps_hi),
                    cfg,
                    energies=event.energies,
                )
            )
        except (PredicateNoisy, ValueError, ArithmeticError) as error:
            logging.warning(f"Could not refine {event.kind} of branches {event.pair}: {error}")
            points.append(event.to_exceptional(config.winding))
    return points


def cmd_sweep(config: RunConfig) -> int:
    """Real spectra over an epsilon grid, with branch labels and exceptional points."""
    cfg = config.solver_config()
    stream = CsvStream(config.output, ROW_COLUMNS) if config.format == "csv" else None
    try:
        table = sweep(
            config.eps_from,
            config.eps_to,
            config.eps_step,
            config.winding,
            config.n_max,
            cfg=cfg,
            on_column=stream.write if stream is not None else None,
            show_progress=sys.stderr.isatty(),
        )
    finally:
        if stream is not None:
            stream.close()
    if stream is None:
        write_table(table.rows, config.output, config.format)

    points = _exceptional_points(table, config, cfg)
    if config.ep_output is not None:
        save_json(points, config.ep_output)

    if (table.summary["status"] != "success").all():
        logging.error("Every epsilon column failed")
        return EXIT_NUMERIC
    if table.rows.empty:
        logging.warning("No real eigenvalues found anywhere in the sweep")
        return EXIT_NO_ROOTS
    return EXIT_OK


def cmd_mismatch(config: RunConfig) -> int:
    """Dump the mismatch function on an energy grid."""
    e_min = DEFAULT_E_MIN if config.e_min is None else config.e_min
    e_max = 2.0 * config.n_max + 6.0 if config.e_max is None else config.e_max
    grid = RootConfig(e_min, e_max, grid_step=config.e_step).grid()
    cfg = config.solver_config()
    try:
        F, logmag = mismatch_batch(
            grid, cfg.contour(config.winding), PotentialSpec(config.epsilon), cfg.integrator
        )
    except ArithmeticError as error:
        logging.error(f"Numerical failure at epsilon={config.epsilon}: {error}")
        return EXIT_NUMERIC
    crossings = int(np.count_nonzero(F[:-1] * F[1:] < 0))
    logging.info(f"Mismatch changes sign {crossings} times on [{e_min}, {e_max}]")
    write_table(pd.DataFrame({"E": grid, "F": F, "logmag": logmag}), config.output, config.format)
    return EXIT_OK


def cmd_contour(config: RunConfig) -> int:
    """Dump the sampled contour, and the potential along it when epsilon is given."""
    spec = ContourSpec(winding=config.winding, tail_extent=config.tail_extent)
    t_minus, t_plus = endpoints(spec)
    t = np.linspace(t_minus, t_plus, config.samples)
    x, _, theta = sample(spec, t)
    frame = pd.DataFrame({"t": t, "re_x": x.real, "im_x": x.imag, "theta": theta})
    if not verify_pt_geometry(spec, config.samples):
        logging.warning(f"Contour {spec} is not PT-symmetric")
    if config.epsilon is not None:
        pspec = PotentialSpec(config.epsilon)
        w = values(pspec, x, theta)
        frame["re_w"] = w.real
        frame["im_w"] = w.imag
        if not verify_pt_potential(pspec, spec, config.samples):
            logging.warning(f"Potential with epsilon={config.epsilon} is not PT-symmetric on {spec}")
    write_table(frame, config.output, config.format)
    return EXIT_OK


def cmd_perturb(config: RunConfig) -> int:
    """First-order energies for levels 0..n."""
    epsilon = 0.0 if config.epsilon is None else config.epsilon
    records = []
    for n in range(config.n_max + 1):
        coefficient = FirstOrderCoefficient.for_level(n)
        records.append(
            {
                "n": n,
                "base": coefficient.base,
                "slope": coefficient.slope,
                "energy": first_order_energy(n, epsilon),
                "log_moment": harmonic_log_moment(n),
            }
        )
    write_table(pd.DataFrame(records), config.output, config.format)
    return EXIT_OK


def cmd_track(config: RunConfig) -> int:
    """Relabel branches of a stored sweep and list merge candidates."""
    try:
        table = TableLoader(config.input).load_table()
    except (FileNotFoundError, ValueError) as error:
        logging.error(f"Cannot read table: {error}")
        return EXIT_USAGE
    tracked = track(table, max_jump=config.max_jump)
    write_table(tracked.rows, config.output, config.format)
    if config.ep_output is not None:
        windings = tracked.rows["lambda"].unique()
        winding = int(windings[0]) if len(windings) else config.winding
        points = [event.to_exceptional(winding) for event in pair_events(tracked)]
        save_json(points, config.ep_output)
    if tracked.rows.empty:
        return EXIT_NO_ROOTS
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "mismatch": cmd_mismatch,
    "contour": cmd_contour,
    "perturb": cmd_perturb,
    "track": cmd_track,
}


class ArgumentParser(argparse.ArgumentParser):
    """Exits with code 64 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_arguments() -> argparse.ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--output",
        type=Path,
        default=None,
        help="File to write results to. Defaults to stdout.",
    )
    parser.add_argument(
        "--format",
        choices=["csv", "json"],
        default="csv",
        help="Output format. CSV files start with a '# format: 1' line.",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="If set, logs debugging information.",
    )
    parser.add_argument(
        "--log_dir",
        type=Path,
        default=None,
        help="Directory for a toboggan.log file in addition to stderr logging.",
    )
    return parser


def _solver_arguments() -> argparse.ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--dt",
        type=float,
        default=1e-3,
        help="RK4 step along the contour parameter (at most 0.01). Divided by 4 above epsilon=1.6.",
    )
    parser.add_argument(
        "--renorm_threshold",
        type=float,
        default=1e100,
        help="Magnitude above which a solution is rescaled by a positive real factor.",
    )
    parser.add_argument(
        "--tail_extent",
        type=float,
        default=10.0,
        help="Reach |Re x| of the straight contour tails (at least 5).",
    )
    parser.add_argument(
        "--grid_step",
        type=float,
        default=0.05,
        help="Energy grid spacing of the bracketing scan.",
    )
    parser.add_argument(
        "--tol",
        type=float,
        default=1e-10,
        help="Final bracket width of every eigenvalue.",
    )
    parser.add_argument(
        "--min_logmag",
        type=float,
        default=16.0,
        help="Smallest endpoint log|psi1|^2 at which a root counts as confirmed.",
    )
    return parser


def _lambda_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--lambda",
        dest="winding",
        type=int,
        default=0,
        help="Winding number of the contour around the branch point.",
    )


def build_parser() -> argparse.ArgumentParser:
    common = _common_arguments()
    solver = _solver_arguments()

    parser = ArgumentParser(
        prog="toboggan",
        description="Real spectra of -psi'' + x^2 (ix)^epsilon psi = E psi on tobogganic contours.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    solve = subparsers.add_parser(
        "solve", parents=[common, solver], help="Real eigenvalues at one epsilon."
    )
    solve.add_argument("--epsilon", type=float, required=True, help="Exponent epsilon in (-1, 2).")
    _lambda_argument(solve)
    solve.add_argument(
        "--n", dest="n_max", type=int, default=6, help="Number of lowest eigenvalues to report."
    )
    solve.add_argument(
        "--emin", dest="e_min", type=float, default=None, help="Lower edge of a fixed energy window."
    )
    solve.add_argument(
        "--emax",
        dest="e_max",
        type=float,
        default=None,
        help="Upper edge of a fixed energy window. Without a window the search expands automatically.",
    )

    sweep_parser = subparsers.add_parser(
        "sweep", parents=[common, solver], help="Real spectra over a range of epsilon."
    )
    sweep_parser.add_argument("--eps_from", type=float, required=True, help="First epsilon.")
    sweep_parser.add_argument("--eps_to", type=float, required=True, help="Last epsilon.")
    sweep_parser.add_argument("--eps_step", type=float, default=0.05, help="Epsilon step.")
    _lambda_argument(sweep_parser)
    sweep_parser.add_argument(
        "--n", dest="n_max", type=int, default=6, help="Number of lowest eigenvalues per epsilon."
    )
    sweep_parser.add_argument(
        "--jobs",
        type=int,
        default=None,
        help=f"Worker processes. Defaults to ${JOBS_ENV}, then to the number of CPUs.",
    )
    sweep_parser.add_argument(
        "--max_jump",
        type=float,
        default=1.0,
        help="Largest energy change allowed when continuing a branch to the next epsilon.",
    )
    sweep_parser.add_argument(
        "--ep_output",
        type=Path,
        default=None,
        help="JSON file for exceptional-point records.",
    )
    sweep_parser.add_argument(
        "--refine",
        action="store_true",
        help="If set, refines every detected merge by bisection on epsilon.",
    )

    mismatch = subparsers.add_parser(
        "mismatch", parents=[common, solver], help="Mismatch function F(E) on an energy grid."
    )
    mismatch.add_argument("--epsilon", type=float, required=True, help="Exponent epsilon in (-1, 2).")
    _lambda_argument(mismatch)
    mismatch.add_argument("--emin", dest="e_min", type=float, required=True, help="First energy.")
    mismatch.add_argument("--emax", dest="e_max", type=float, required=True, help="Last energy.")
    mismatch.add_argument(
        "--estep", dest="e_step", type=float, default=0.05, help="Energy spacing."
    )

    contour = subparsers.add_parser(
        "contour", parents=[common], help="Sampled contour (t, x, theta) and optionally W."
    )
    _lambda_argument(contour)
    contour.add_argument(
        "--tail_extent", type=float, default=10.0, help="Reach |Re x| of the straight tails."
    )
    contour.add_argument("--samples", type=int, default=1001, help="Number of sample points.")
    contour.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help="If given, adds the potential (re_w, im_w) along the contour.",
    )

    perturb = subparsers.add_parser(
        "perturb", parents=[common], help="First-order energies around the harmonic oscillator."
    )
    perturb.add_argument("--n", dest="n_max", type=int, default=3, help="Highest level index.")
    perturb.add_argument("--epsilon", type=float, default=0.0, help="Exponent epsilon.")

    track_parser = subparsers.add_parser(
        "track", parents=[common], help="Relabel branches of a stored sweep table."
    )
    track_parser.add_argument(
        "--input", type=Path, required=True, help="Sweep table (.csv or .json)."
    )
    track_parser.add_argument(
        "--max_jump",
        type=float,
        default=1.0,
        help="Largest energy change allowed when continuing a branch.",
    )
    track_parser.add_argument(
        "--ep_output",
        type=Path,
        default=None,
        help="JSON file for merge candidates.",
    )
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parses command-line arguments and returns a RunConfig object."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return RunConfig(**vars(args))
    except ValueError as error:
        parser.error(str(error))


def main(argv: Optional[Sequence[str]] = None) -> int:
    config = parse_args(argv)
    setup_logging(config.log_dir, verbose=config.verbose)
    start_time = time.time()
    try:
        code = COMMANDS[config.command](config)
    except ArithmeticError:
        logging.exception(f"Numerical failure in '{config.command}'")
        code = EXIT_NUMERIC
    total_time = timedelta(seconds=time.time() - start_time)
    logging.info(f"'{config.command}' finished in {total_time} with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
