import logging
from typing import TYPE_CHECKING, Any, Dict, List, Set, Tuple

from toboggan_spectra.integrator import SolutionPair, wronskian_defect

if TYPE_CHECKING:
    import pandas as pd

    from toboggan_spectra.spectrum import SpectralTable

logger = logging.getLogger(__name__)


def check_wronskian(pair: SolutionPair, tol: float = 1e-8) -> bool:
    """
    Per-run conservation sentinel. Uses the scale-free defect, so it stays
    meaningful after the solutions have grown by many orders of magnitude.
    """
    defect = wronskian_defect(pair)
    if not defect <= tol:
        logger.warning(
            "Wronskian defect %.3e at t=%s exceeds %.1e; the step size is probably too large.",
            defect,
            pair.t,
            tol,
        )
        return False
    return True


def handle_solve_failure(error: Exception, epsilon: float, winding: int) -> Dict[str, Any]:
    """
    Record for an epsilon column whose root search failed. The sweep keeps
    going; the column shows up with no energies and status 'failure'.
    """
    logger.warning(
        "Root search failed at epsilon=%s, lambda=%s: %s: %s",
        epsilon,
        winding,
        type(error).__name__,
        error,
    )
    return {
        "epsilon": float(epsilon),
        "winding": int(winding),
        "energies": [],
        "complete_to": float("nan"),
        "flags": [],
        "status": "failure",
        "error": f"{type(error).__name__}: {error}",
    }


def _crossed_branches(col_a: "pd.DataFrame", col_b: "pd.DataFrame", ceiling: float) -> Set[int]:
    """Branches present in both columns that sit on different sides of ``ceiling``."""
    a = col_a[col_a["branch"] >= 0].set_index("branch")["energy"]
    b = col_b[col_b["branch"] >= 0].set_index("branch")["energy"]
    return {
        int(bid) for bid in a.index.intersection(b.index) if (a[bid] <= ceiling) != (b[bid] <= ceiling)
    }


def _count_below(column: "pd.DataFrame", ceiling: float, skip: Set[int]) -> int:
    below = column[column["energy"] <= ceiling]
    return int((~below["branch"].isin(skip)).sum())


def check_reality_pairing(table: "SpectralTable") -> List[Tuple[float, float, int, int]]:
    """
    Real eigenvalues leave the real axis in conjugate pairs, so between two
    adjacent epsilon columns the number of real roots below both of their
    ``complete_to`` ceilings changes by an even number. A labelled branch found
    in both columns that moved across that ceiling is left out of both counts.
    Returns (eps_a, eps_b, count_a, count_b) for every odd change.
    """
    summary = table.summary[table.summary["status"] == "success"].sort_values("epsilon", kind="stable")
    if len(summary) < 2:
        return []
    columns = {eps: group for eps, group in table.rows.groupby("epsilon")}
    empty = table.rows.iloc[0:0]
    epsilons = summary["epsilon"].to_list()
    ceilings = summary["complete_to"].fillna(float("inf")).to_list()

    flagged = []
    for k in range(len(epsilons) - 1):
        eps_a, eps_b = epsilons[k], epsilons[k + 1]
        col_a, col_b = columns.get(eps_a, empty), columns.get(eps_b, empty)
        ceiling = min(ceilings[k], ceilings[k + 1])
        crossed = _crossed_branches(col_a, col_b, ceiling)
        count_a = _count_below(col_a, ceiling, crossed)
        count_b = _count_below(col_b, ceiling, crossed)
        if (count_a - count_b) % 2:
            logger.warning(
                "Odd change in real-root count between epsilon=%s (%d) and %s (%d) below E=%.4g; "
                "likely a scan artifact.",
                eps_a,
                count_a,
                eps_b,
                count_b,
                ceiling,
            )
            flagged.append((eps_a, eps_b, count_a, count_b))
    return flagged
