"""Real spectra over epsilon, branch tracking and exceptional points.

A sweep solves every epsilon column independently (optionally in worker
processes), labels the roots with branch ids as the columns arrive and records
columns that failed instead of aborting. Exceptional points are first seen as
two neighbouring branches that end (or start) at the same epsilon step and are
then refined by bisecting on epsilon the presence of the real pair.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from toboggan_spectra.callbacks import SweepProgress
from toboggan_spectra.contour import ContourSpec
from toboggan_spectra.integrator import IntegratorConfig
from toboggan_spectra.potential import SOLVER_RANGE, PotentialSpec
from toboggan_spectra.rootfind import Bracket, RootConfig, refine_brackets, scan, split_node_glitches
from toboggan_spectra.shooting import mismatch_batch, mismatch_values
from toboggan_spectra.validator import check_reality_pairing, handle_solve_failure

logger = logging.getLogger(__name__)

ROW_COLUMNS = ["epsilon", "lambda", "index", "energy", "branch"]
SUMMARY_COLUMNS = ["epsilon", "lambda", "found_count", "complete_to", "status"]

DEFAULT_E_MIN = -2.0
# Results near epsilon = -1 are unreliable for multiply wound contours.
MULTI_WINDING_EPS_FLOOR = -0.8
RAW_SCAN_POINTS = 5
# Two roots this close to one scan node, in units of grid_step, are a one-sample glitch.
NODE_GLITCH_FRACTION = 1e-6
# Tracker steps up to this size in epsilon get the plain max_jump.
JUMP_REFERENCE_STEP = 0.05


class PredicateNoisy(RuntimeError):
    """Pair presence flips more than once across an epsilon bracket."""

    def __init__(self, message: str, scan: List[Tuple[float, bool]]):
        super().__init__(message)
        self.scan = scan


@dataclass(frozen=True)
class SolverConfig:
    tail_extent: float = 10.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    grid_step: float = 0.05
    tol: float = 1e-10
    flat_threshold: float = 0.1
    window_cap: float = 80.0
    max_jump: float = 1.0
    eps_tol: float = 1e-3
    min_logmag: float = 16.0
    confirm_extension: float = 2.0
    confirm_delta: float = 1e-5
    jobs: int = 1

    def __post_init__(self):
        if not self.window_cap > 0:
            raise ValueError(f"window_cap must be positive, got {self.window_cap}")
        if not self.max_jump > 0:
            raise ValueError(f"max_jump must be positive, got {self.max_jump}")
        if not self.eps_tol > 0:
            raise ValueError(f"eps_tol must be positive, got {self.eps_tol}")
        if not self.confirm_extension > 0:
            raise ValueError(f"confirm_extension must be positive, got {self.confirm_extension}")
        if not self.confirm_delta > 0:
            raise ValueError(f"confirm_delta must be positive, got {self.confirm_delta}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")
        # Fails early on a tail that is too short.
        self.contour(0)

    def contour(self, winding: int) -> ContourSpec:
        return ContourSpec(winding=winding, tail_extent=self.tail_extent)

    def root_config(self, e_min: float, e_max: float, grid_step: Optional[float] = None) -> RootConfig:
        return RootConfig(
            e_min=e_min,
            e_max=e_max,
            grid_step=self.grid_step if grid_step is None else grid_step,
            tol=self.tol,
            flat_threshold=self.flat_threshold,
        )


@dataclass
class ColumnResult:
    """Real roots at one epsilon.

    ``complete_to`` is the energy below which no root was skipped. ``flags`` holds
    near-tangential minima of the mismatch and roots that failed confirmation.
    """

    epsilon: float
    winding: int
    energies: List[float]
    complete_to: float
    flags: List[float] = field(default_factory=list)
    status: str = "success"
    error: Optional[str] = None

    @property
    def found_count(self) -> int:
        return len(self.energies)


@dataclass
class SpectralTable:
    """Sweep output: one row per real root, one summary line per epsilon column."""

    rows: pd.DataFrame
    summary: pd.DataFrame

    @classmethod
    def from_rows(cls, rows: pd.DataFrame) -> "SpectralTable":
        """Rebuild a table from rows alone, e.g. a sweep read back from disk.

        Columns without roots are not recoverable and completeness is unknown.
        """
        missing = {"epsilon", "lambda", "energy"} - set(rows.columns)
        if missing:
            raise ValueError(f"table rows are missing columns: {sorted(missing)}")
        rows = rows.sort_values(["epsilon", "energy"], kind="stable").reset_index(drop=True)
        rows["index"] = rows.groupby("epsilon").cumcount()
        if "branch" not in rows.columns:
            rows["branch"] = -1
        summary = (
            rows.groupby("epsilon")
            .agg(**{"lambda": ("lambda", "first"), "found_count": ("energy", "size")})
            .reset_index()
        )
        summary["complete_to"] = np.nan
        summary["status"] = "success"
        return cls(rows=rows[ROW_COLUMNS].copy(), summary=summary[SUMMARY_COLUMNS].copy())

    @property
    def epsilons(self) -> List[float]:
        return self.summary["epsilon"].to_list()

    def energies_at(self, epsilon: float) -> np.ndarray:
        column = self.rows[np.isclose(self.rows["epsilon"], epsilon, rtol=0.0, atol=1e-12)]
        return np.sort(column["energy"].to_numpy())

    def branch(self, branch_id: int) -> pd.DataFrame:
        return self.rows[self.rows["branch"] == branch_id].sort_values("epsilon")


class ExceptionalPoint(BaseModel):
    winding: int
    eps_lo: float
    eps_hi: float
    eps_star: float
    energy_star: float
    pair: Tuple[int, int]
    status: Literal["bracketed", "refined"]


@dataclass(frozen=True)
class BranchEvent:
    """Two branches, neighbours in energy, that end (merge) or start (birth) together."""

    kind: Literal["merge", "birth"]
    eps_lo: float
    eps_hi: float
    pair: Tuple[int, int]
    energies: Tuple[float, float]

    def to_exceptional(self, winding: int) -> ExceptionalPoint:
        return ExceptionalPoint(
            winding=winding,
            eps_lo=self.eps_lo,
            eps_hi=self.eps_hi,
            eps_star=0.5 * (self.eps_lo + self.eps_hi),
            energy_star=0.5 * (self.energies[0] + self.energies[1]),
            pair=self.pair,
            status="bracketed",
        )


def _mismatch_fn(epsilon: float, winding: int, cfg: SolverConfig) -> Callable[[np.ndarray], np.ndarray]:
    pspec = PotentialSpec(epsilon)
    pspec.require_solver_range()
    return partial(
        mismatch_values, spec=cfg.contour(winding), pspec=pspec, cfg=cfg.integrator
    )


def _confirm_fn(
    epsilon: float, winding: int, cfg: SolverConfig
) -> Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """``(F, logmag)`` on tails longer by ``confirm_extension``."""
    spec = ContourSpec(winding=winding, tail_extent=cfg.tail_extent + cfg.confirm_extension)
    return partial(mismatch_batch, spec=spec, pspec=PotentialSpec(epsilon), cfg=cfg.integrator)


def confirm_roots(
    check: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    roots: Sequence[float],
    min_logmag: float,
    delta: float,
) -> Tuple[List[float], List[float]]:
    """Split ``roots`` into confirmed roots and rejected energies.

    A root is confirmed when ``F`` from ``check`` still changes sign across
    ``root -+ delta`` (narrowed to a quarter of the gap to a neighbouring root)
    and ``logmag`` reaches ``min_logmag`` on both sides. A solution that has not
    grown along the tails does not tell decaying from growing behaviour, so
    its zeros are not eigenvalues.
    """
    if len(roots) == 0:
        return [], []
    r = np.sort(np.asarray(roots, dtype=float))
    half = np.full(r.size, float(delta))
    if r.size > 1:
        gaps = np.diff(r)
        nearest = np.minimum(np.append(np.inf, gaps), np.append(gaps, np.inf))
        half = np.minimum(half, 0.25 * nearest)
    F, logmag = check(np.concatenate((r - half, r + half)))
    F, logmag = np.asarray(F, dtype=float), np.asarray(logmag, dtype=float)
    n = r.size
    with np.errstate(invalid="ignore"):
        grown = np.minimum(logmag[:n], logmag[n:]) >= min_logmag
        persists = F[:n] * F[n:] < 0
    ok = grown & persists
    return r[ok].tolist(), r[~ok].tolist()


def solve_column(
    epsilon: float,
    winding: int,
    n_max: int,
    cfg: Optional[SolverConfig] = None,
    window: Optional[Tuple[float, float]] = None,
) -> ColumnResult:
    """Lowest real roots at one epsilon.

    Without an explicit ``window`` the search starts on ``[-2, 2 n_max + 6]`` and
    keeps doubling the upper edge until ``n_max`` roots are found or
    ``window_cap`` is reached.
    """
    cfg = cfg or SolverConfig()
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    f = _mismatch_fn(epsilon, winding, cfg)
    check = _confirm_fn(epsilon, winding, cfg)

    if window is not None:
        lo, hi = float(window[0]), float(window[1])
        expand = False
    else:
        lo, hi = DEFAULT_E_MIN, min(2.0 * n_max + 6.0, max(cfg.window_cap, 1.0))
        expand = True

    roots: List[float] = []
    flags: List[float] = []
    rejected: List[float] = []
    while True:
        root_cfg = cfg.root_config(lo, hi)
        brackets, segment_flags = scan(f, root_cfg)
        found, glitches = split_node_glitches(
            refine_brackets(f, brackets, cfg.tol),
            root_cfg.grid(),
            NODE_GLITCH_FRACTION * root_cfg.grid_step,
        )
        confirmed, spurious = confirm_roots(check, found, cfg.min_logmag, cfg.confirm_delta)
        roots.extend(confirmed)
        rejected.extend(glitches + spurious)
        flags.extend(segment_flags)
        # The mismatch is not trusted above a rejected root.
        if not expand or len(roots) >= n_max or rejected:
            break
        new_hi = min(cfg.window_cap, 2.0 * hi)
        if new_hi - hi <= cfg.grid_step:
            break
        logger.debug(
            "epsilon=%s: %d of %d roots below %s, expanding to %s",
            epsilon,
            len(roots),
            n_max,
            hi,
            new_hi,
        )
        lo, hi = hi, new_hi

    roots.sort()
    if len(roots) > n_max:
        complete_to = 0.5 * (roots[n_max - 1] + roots[n_max])
    else:
        complete_to = hi
    if rejected:
        rejected.sort()
        complete_to = min(complete_to, rejected[0])
        logger.info(
            "epsilon=%s, lambda=%s: rejected unconfirmed roots at E=%s",
            epsilon,
            winding,
            ", ".join(f"{e:.6g}" for e in rejected),
        )
        flags = sorted(flags + rejected)
    if flags:
        logger.info(
            "epsilon=%s, lambda=%s: flagged energies E=%s",
            epsilon,
            winding,
            ", ".join(f"{e:.4g}" for e in flags),
        )
    if len(roots) < n_max:
        logger.debug(
            "epsilon=%s, lambda=%s: only %d real roots below %s", epsilon, winding, len(roots), hi
        )
    return ColumnResult(
        epsilon=float(epsilon),
        winding=winding,
        energies=roots[:n_max],
        complete_to=float(complete_to),
        flags=flags,
    )


def real_eigenvalues(
    epsilon: float,
    winding: int,
    n_max: int,
    window: Optional[Tuple[float, float]] = None,
    cfg: Optional[SolverConfig] = None,
) -> List[float]:
    """The lowest ``min(n_max, found)`` real eigenvalues, ascending."""
    return solve_column(epsilon, winding, n_max, cfg=cfg, window=window).energies


def _solve_task(task: Tuple[float, int, int, SolverConfig]) -> ColumnResult:
    epsilon, winding, n_max, cfg = task
    try:
        return solve_column(epsilon, winding, n_max, cfg)
    except Exception as error:
        return ColumnResult(**handle_solve_failure(error, epsilon, winding))


def sweep_epsilons(eps_from: float, eps_to: float, eps_step: float, winding: int) -> np.ndarray:
    if not eps_step > 0:
        raise ValueError(f"eps_step must be positive, got {eps_step}")
    if eps_from > eps_to:
        raise ValueError(f"empty epsilon range [{eps_from}, {eps_to}]")
    if winding >= 2 and eps_from < MULTI_WINDING_EPS_FLOOR:
        logger.warning(
            "lambda=%s sweeps are limited to epsilon >= %s; clipping %s",
            winding,
            MULTI_WINDING_EPS_FLOOR,
            eps_from,
        )
        eps_from = MULTI_WINDING_EPS_FLOOR
        if eps_from > eps_to:
            raise ValueError(f"empty epsilon range after clipping: [{eps_from}, {eps_to}]")
    lo, hi = SOLVER_RANGE
    if not (lo < eps_from and eps_to < hi):
        raise ValueError(f"epsilon range must lie inside ({lo}, {hi}), got [{eps_from}, {eps_to}]")
    n = int(math.floor((eps_to - eps_from) / eps_step + 1e-9))
    return np.round(eps_from + eps_step * np.arange(n + 1), 12)


def _column_rows(column: ColumnResult, labels: Sequence[int]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "epsilon": [column.epsilon] * len(column.energies),
            "lambda": [column.winding] * len(column.energies),
            "index": list(range(len(column.energies))),
            "energy": column.energies,
            "branch": list(labels),
        },
        columns=ROW_COLUMNS,
    )


def sweep(
    eps_from: float,
    eps_to: float,
    eps_step: float,
    winding: int,
    n_max: int,
    cfg: Optional[SolverConfig] = None,
    on_column: Optional[Callable[[pd.DataFrame], None]] = None,
    show_progress: bool = False,
) -> SpectralTable:
    """Real spectra on a uniform epsilon grid with branch labels.

    ``on_column`` receives the labelled rows of each column in epsilon order as
    soon as that column is available, so callers can flush partial results.
    """
    cfg = cfg or SolverConfig()
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    epsilons = sweep_epsilons(eps_from, eps_to, eps_step, winding)
    tasks = [(float(eps), winding, n_max, cfg) for eps in epsilons]
    logger.info(
        "Sweeping lambda=%s over %d epsilon values [%s, %s] with %d job(s)",
        winding,
        len(tasks),
        epsilons[0],
        epsilons[-1],
        cfg.jobs,
    )

    tracker = BranchTracker(max_jump=cfg.max_jump)
    frames: List[pd.DataFrame] = []
    summary: List[Dict] = []

    def consume(results: Iterable[ColumnResult], progress: SweepProgress) -> None:
        for column in results:
            labels: List[int] = []
            if column.status == "success":
                labels = tracker.update(column.epsilon, column.energies)
            frame = _column_rows(column, labels)
            frames.append(frame)
            summary.append(
                {
                    "epsilon": column.epsilon,
                    "lambda": column.winding,
                    "found_count": column.found_count,
                    "complete_to": column.complete_to,
                    "status": column.status,
                }
            )
            progress.update(column)
            if on_column is not None:
                on_column(frame)

    with SweepProgress(total=len(tasks), disable=not show_progress) as progress:
        if cfg.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
                consume(pool.map(_solve_task, tasks), progress)
        else:
            consume(map(_solve_task, tasks), progress)
        failures = progress.failures

    non_empty = [frame for frame in frames if len(frame)]
    rows = (
        pd.concat(non_empty, ignore_index=True)
        if non_empty
        else pd.DataFrame(columns=ROW_COLUMNS)
    )
    table = SpectralTable(rows=rows, summary=pd.DataFrame(summary, columns=SUMMARY_COLUMNS))
    if failures:
        logger.warning("%d of %d epsilon columns failed", failures, len(tasks))
    check_reality_pairing(table)
    return table


@dataclass
class Branch:
    branch_id: int
    epsilons: List[float] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    open: bool = True


def jump_allowance(max_jump: float, eps_step: float) -> float:
    """Largest energy change accepted for one branch over an epsilon step."""
    return max_jump * max(1.0, abs(eps_step) / JUMP_REFERENCE_STEP)


class BranchTracker:
    """Streaming nearest-energy continuation of branches across epsilon columns.

    Each open branch is extrapolated linearly from its last two points to the
    new epsilon. Consecutive columns are then aligned without crossing (labels
    keep their energy order). A match costs the distance to the prediction and
    is forbidden above ``jump_allowance(max_jump, step)``; leaving a root
    unmatched costs the same allowance. An unmatched previous root ends its
    branch, an unmatched new root starts one.
    """

    def __init__(self, max_jump: float = 1.0):
        if not max_jump > 0:
            raise ValueError(f"max_jump must be positive, got {max_jump}")
        self.max_jump = max_jump
        self.branches: List[Branch] = []
        self.ambiguities = 0
        self._active: List[int] = []
        self._last_epsilon: Optional[float] = None

    def update(self, epsilon: float, energies: Sequence[float]) -> List[int]:
        """Label one column; returns branch ids in ascending energy order."""
        current = sorted(float(e) for e in energies)
        previous = [self._predict(self.branches[b], epsilon) for b in self._active]
        step = 0.0 if self._last_epsilon is None else epsilon - self._last_epsilon
        gap = jump_allowance(self.max_jump, step)
        labels = [-1] * len(current)
        matched = set()
        for i, j in self._align(epsilon, previous, current, gap):
            labels[j] = self._active[i]
            matched.add(i)
        for i, branch_id in enumerate(self._active):
            if i not in matched:
                self.branches[branch_id].open = False
        for j, energy in enumerate(current):
            if labels[j] < 0:
                labels[j] = len(self.branches)
                self.branches.append(Branch(branch_id=labels[j]))
            branch = self.branches[labels[j]]
            branch.epsilons.append(float(epsilon))
            branch.energies.append(energy)
        self._active = labels
        self._last_epsilon = float(epsilon)
        return labels

    @staticmethod
    def _predict(branch: Branch, epsilon: float) -> float:
        if len(branch.energies) < 2 or branch.epsilons[-1] == branch.epsilons[-2]:
            return branch.energies[-1]
        rise = branch.energies[-1] - branch.energies[-2]
        slope = rise / (branch.epsilons[-1] - branch.epsilons[-2])
        return branch.energies[-1] + slope * (epsilon - branch.epsilons[-1])

    def _align(
        self, epsilon: float, previous: List[float], current: List[float], gap: float
    ) -> List[Tuple[int, int]]:
        m, n = len(previous), len(current)
        cost = np.zeros((m + 1, n + 1))
        cost[:, 0] = gap * np.arange(m + 1)
        cost[0, :] = gap * np.arange(n + 1)

        def match_cost(i: int, j: int) -> float:
            d = abs(previous[i - 1] - current[j - 1])
            return cost[i - 1, j - 1] + d if d <= gap else math.inf

        for i in range(1, m + 1):
            for j in range(1, n + 1):
                cost[i, j] = min(match_cost(i, j), cost[i - 1, j] + gap, cost[i, j - 1] + gap)

        pairs = []
        i, j = m, n
        while i > 0 and j > 0:
            options = (match_cost(i, j), cost[i - 1, j] + gap, cost[i, j - 1] + gap)
            best = cost[i, j]
            choices = [k for k, v in enumerate(options) if math.isclose(v, best, rel_tol=1e-12, abs_tol=1e-12)]
            if len(choices) > 1:
                self.ambiguities += 1
                logger.info(
                    "Ambiguous continuation at epsilon=%s near E=%.6g; kept energy order",
                    epsilon,
                    current[j - 1],
                )
            if choices[0] == 0:
                pairs.append((i - 1, j - 1))
                i, j = i - 1, j - 1
            elif choices[0] == 1:
                i -= 1
            else:
                j -= 1
        return pairs[::-1]


def _successful_columns(table: SpectralTable) -> pd.DataFrame:
    summary = table.summary[table.summary["status"] == "success"]
    return summary.sort_values("epsilon", kind="stable")


def track(table: SpectralTable, max_jump: float = 1.0) -> SpectralTable:
    """Relabel the branches of ``table`` by nearest-energy continuation."""
    tracker = BranchTracker(max_jump=max_jump)
    rows = table.rows.sort_values(["epsilon", "energy"], kind="stable").reset_index(drop=True)
    branch = np.full(len(rows), -1, dtype=int)
    for epsilon in _successful_columns(table)["epsilon"]:
        where = np.flatnonzero(rows["epsilon"].to_numpy() == epsilon)
        labels = tracker.update(epsilon, rows["energy"].to_numpy()[where])
        branch[where] = labels
    rows["branch"] = branch
    ended = sum(not b.open for b in tracker.branches)
    logger.info("Tracked %d branches, %d ended inside the sweep", len(tracker.branches), ended)
    return SpectralTable(rows=rows[ROW_COLUMNS], summary=table.summary.copy())


def _adjacent_pairs(
    kind: str, eps_lo: float, eps_hi: float, column: pd.DataFrame, mask: List[bool]
) -> List[BranchEvent]:
    ids = column["branch"].to_list()
    energies = column["energy"].to_list()
    events = []
    k = 0
    while k < len(ids) - 1:
        if mask[k] and mask[k + 1]:
            events.append(
                BranchEvent(
                    kind=kind,
                    eps_lo=eps_lo,
                    eps_hi=eps_hi,
                    pair=(int(ids[k]), int(ids[k + 1])),
                    energies=(float(energies[k]), float(energies[k + 1])),
                )
            )
            k += 2
        else:
            k += 1
    return events


def pair_events(table: SpectralTable) -> List[BranchEvent]:
    """Neighbouring branch pairs that end or start at the same epsilon step.

    Roots above a column's ``complete_to`` may simply lie outside its window,
    so their appearance or disappearance is not an event. A step yields merges
    only when the number of real roots below both ceilings drops by at least
    two, and births only when it rises by two; one event per two roots.
    """
    columns = _successful_columns(table)
    epsilons = columns["epsilon"].to_list()
    ceilings = columns["complete_to"].fillna(np.inf).to_list()
    by_eps = {
        eps: group.sort_values("energy", kind="stable")
        for eps, group in table.rows.groupby("epsilon")
    }
    empty = pd.DataFrame(columns=ROW_COLUMNS)

    events: List[BranchEvent] = []
    for k in range(len(epsilons) - 1):
        a, b = epsilons[k], epsilons[k + 1]
        col_a, col_b = by_eps.get(a, empty), by_eps.get(b, empty)
        ids_a, ids_b = set(col_a["branch"]), set(col_b["branch"])
        ended = [
            bid not in ids_b and energy <= ceilings[k + 1]
            for bid, energy in zip(col_a["branch"], col_a["energy"])
        ]
        born = [
            bid not in ids_a and energy <= ceilings[k]
            for bid, energy in zip(col_b["branch"], col_b["energy"])
        ]
        ceiling = min(ceilings[k], ceilings[k + 1])
        drop = int((col_a["energy"] <= ceiling).sum()) - int((col_b["energy"] <= ceiling).sum())
        merges = _adjacent_pairs("merge", a, b, col_a, ended)
        births = _adjacent_pairs("birth", a, b, col_b, born)
        allowed_merges, allowed_births = max(drop, 0) // 2, max(-drop, 0) // 2
        if len(merges) > allowed_merges or len(births) > allowed_births:
            logger.debug(
                "epsilon %s -> %s: real count changes by %d; ignoring %d relabelled pair(s)",
                a,
                b,
                -drop,
                max(len(merges) - allowed_merges, 0) + max(len(births) - allowed_births, 0),
            )
        events.extend(merges[:allowed_merges])
        events.extend(births[:allowed_births])
    for event in events:
        logger.info(
            "Branches %s %s between epsilon=%s and %s near E=%.5g",
            event.pair,
            "merge" if event.kind == "merge" else "are born",
            event.eps_lo,
            event.eps_hi,
            0.5 * sum(event.energies),
        )
    return events


@dataclass(frozen=True)
class _PairWindow:
    """Counts real roots in a fixed energy window around a pair."""

    e_lo: float
    e_hi: float
    grid_step: float

    @classmethod
    def around(cls, e1: float, e2: float, cfg: SolverConfig) -> "_PairWindow":
        e1, e2 = sorted((float(e1), float(e2)))
        gap = e2 - e1
        margin = max(1.0, 2.0 * gap)
        step = min(cfg.grid_step, max(gap / 4.0, 1e-4))
        return cls(e_lo=e1 - margin, e_hi=e2 + margin, grid_step=step)

    def brackets(self, epsilon: float, winding: int, cfg: SolverConfig) -> Tuple[List[Bracket], Callable]:
        f = _mismatch_fn(epsilon, winding, cfg)
        brackets, _ = scan(f, cfg.root_config(self.e_lo, self.e_hi, grid_step=self.grid_step))
        return brackets, f


def _closest_pair_mean(roots: Sequence[float]) -> Optional[float]:
    if len(roots) < 2:
        return None
    gaps = np.diff(roots)
    k = int(np.argmin(gaps))
    return 0.5 * (roots[k] + roots[k + 1])


def locate_exceptional(
    winding: int,
    branch_pair: Tuple[int, int],
    bracket: Tuple[float, float],
    cfg: Optional[SolverConfig] = None,
    energies: Optional[Tuple[float, float]] = None,
    max_steps: int = 40,
) -> ExceptionalPoint:
    """Refine the epsilon at which a real pair of eigenvalues disappears.

    ``energies`` are the pair's energies at the end of ``bracket`` where it
    exists; when omitted the lowest two real roots at either end are tried.
    """
    cfg = cfg or SolverConfig()
    eps_a, eps_b = sorted((float(bracket[0]), float(bracket[1])))
    if eps_a == eps_b:
        raise ValueError(f"bracket must have distinct ends, got {bracket}")

    counts: Dict[Tuple[_PairWindow, float], int] = {}

    def count(window: _PairWindow, epsilon: float) -> int:
        key = (window, epsilon)
        if key not in counts:
            counts[key] = len(window.brackets(epsilon, winding, cfg)[0])
        return counts[key]

    if energies is not None:
        candidates = [_PairWindow.around(energies[0], energies[1], cfg)]
    else:
        candidates = []
        for epsilon in (eps_a, eps_b):
            lowest = solve_column(epsilon, winding, 2, cfg).energies
            if len(lowest) == 2:
                candidates.append(_PairWindow.around(lowest[0], lowest[1], cfg))

    chosen = None
    for window in candidates:
        count_a, count_b = count(window, eps_a), count(window, eps_b)
        if count_a != count_b:
            chosen = window
            break
    if chosen is None:
        raise ValueError(
            f"no real pair of lambda={winding} is present at exactly one end of "
            f"epsilon bracket [{eps_a}, {eps_b}]"
        )

    window = chosen
    count_a, count_b = count(window, eps_a), count(window, eps_b)
    expected = max(count_a, count_b)
    surviving, lost = (eps_a, eps_b) if count_a > count_b else (eps_b, eps_a)

    def present(epsilon: float) -> bool:
        return count(window, epsilon) >= expected

    raw = [(float(e), present(float(e))) for e in np.linspace(surviving, lost, RAW_SCAN_POINTS)]
    flips = sum(raw[k][1] != raw[k + 1][1] for k in range(len(raw) - 1))
    if flips > 1:
        raise PredicateNoisy(
            f"pair presence flips {flips} times across epsilon [{eps_a}, {eps_b}]", scan=raw
        )
    k = next(k for k in range(len(raw) - 1) if raw[k][1] and not raw[k + 1][1])
    inside, outside = raw[k][0], raw[k + 1][0]

    steps = 0
    while abs(outside - inside) > cfg.eps_tol and steps < max_steps:
        mid = 0.5 * (inside + outside)
        if present(mid):
            inside = mid
        else:
            outside = mid
        steps += 1
    status = "refined" if abs(outside - inside) <= cfg.eps_tol else "bracketed"

    brackets, f = window.brackets(inside, winding, cfg)
    roots = refine_brackets(f, brackets, cfg.tol)
    energy_star = _closest_pair_mean(roots)
    if energy_star is None:
        energy_star = 0.5 * (window.e_lo + window.e_hi)
    point = ExceptionalPoint(
        winding=winding,
        eps_lo=min(inside, outside),
        eps_hi=max(inside, outside),
        eps_star=0.5 * (inside + outside),
        energy_star=float(energy_star),
        pair=(int(branch_pair[0]), int(branch_pair[1])),
        status=status,
    )
    logger.info(
        "Exceptional point for lambda=%s: epsilon*=%.5f in [%.5f, %.5f], E*=%.5f (%s)",
        winding,
        point.eps_star,
        point.eps_lo,
        point.eps_hi,
        point.energy_star,
        status,
    )
    return point
