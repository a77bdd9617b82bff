"""Zeros of a real function of energy: grid bracketing, bisection, multisection.

Functions passed to ``scan`` and ``refine_brackets`` are vectorized: they take a
1-d array of energies and return an array of the same shape. ``bisect`` calls
its function with one float at a time.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 200


class BracketInvalid(ValueError):
    """Raised when a bracket does not enclose a sign change."""


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got ({self.lo}, {self.hi})")

    @property
    def valid(self) -> bool:
        return self.f_lo * self.f_hi < 0


@dataclass(frozen=True)
class RootConfig:
    e_min: float
    e_max: float
    grid_step: float = 0.05
    tol: float = 1e-10
    flat_threshold: float = 0.1

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise ValueError(f"e_min must be below e_max, got [{self.e_min}, {self.e_max}]")
        if not 0 < self.grid_step < self.e_max - self.e_min:
            raise ValueError(
                f"grid_step must be positive and smaller than the window, got {self.grid_step}"
            )
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not self.flat_threshold > 0:
            raise ValueError(f"flat_threshold must be positive, got {self.flat_threshold}")

    def grid(self) -> np.ndarray:
        n = max(1, int(round((self.e_max - self.e_min) / self.grid_step)))
        return np.linspace(self.e_min, self.e_max, n + 1)


def scan(
    f: Callable[[np.ndarray], np.ndarray], cfg: RootConfig
) -> Tuple[List[Bracket], List[float]]:
    """Evaluate ``f`` on the uniform grid of ``cfg``.

    Returns the sign-change brackets in ascending order and the energies of
    flagged grid points: local minima of ``|f|`` that stay on one side of zero
    while dropping below ``flat_threshold`` times the larger neighbour. A grid
    point where ``f`` is exactly zero becomes a bracket over its two neighbours
    when they differ in sign, and a flag when they do not.
    """
    grid = cfg.grid()
    fv = np.asarray(f(grid), dtype=float)
    if fv.shape != grid.shape:
        raise ValueError(f"f returned shape {fv.shape} for a grid of shape {grid.shape}")

    brackets: List[Bracket] = []
    flags: List[float] = []
    for i in range(grid.size - 1):
        if fv[i] * fv[i + 1] < 0:
            brackets.append(Bracket(grid[i], grid[i + 1], fv[i], fv[i + 1]))

    magnitude = np.abs(fv)
    for i in range(1, grid.size - 1):
        left, mid, right = fv[i - 1], fv[i], fv[i + 1]
        if mid == 0.0:
            if left * right < 0:
                brackets.append(Bracket(grid[i - 1], grid[i + 1], left, right))
            elif left * right > 0:
                flags.append(float(grid[i]))
            continue
        if left * mid <= 0 or mid * right <= 0:
            continue
        neighbour = max(magnitude[i - 1], magnitude[i + 1])
        is_minimum = magnitude[i] < magnitude[i - 1] and magnitude[i] <= magnitude[i + 1]
        if is_minimum and magnitude[i] < cfg.flat_threshold * neighbour:
            flags.append(float(grid[i]))

    brackets.sort(key=lambda b: b.lo)
    if not np.all(np.isfinite(fv)):
        logger.warning("Scan on [%s, %s] produced non-finite values", cfg.e_min, cfg.e_max)
    logger.debug(
        "Scan on [%s, %s] with %d points: %d brackets, %d flags",
        cfg.e_min,
        cfg.e_max,
        grid.size,
        len(brackets),
        len(flags),
    )
    return brackets, flags


def bisect(f: Callable[[float], float], b: Bracket, tol: float) -> float:
    """Bisect ``b`` until it is no wider than ``tol``; returns the midpoint."""
    if not b.valid:
        raise BracketInvalid(
            f"no sign change on [{b.lo}, {b.hi}]: f_lo={b.f_lo}, f_hi={b.f_hi}"
        )
    lo, hi, f_lo = b.lo, b.hi, b.f_lo
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = float(f(mid))
        if f_mid == 0.0:
            return mid
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def refine_brackets(
    f: Callable[[np.ndarray], np.ndarray],
    brackets: Sequence[Bracket],
    tol: float,
    points: int = 8,
) -> List[float]:
    """Shrink every bracket together by multisection.

    Each pass places ``points`` interior nodes in every open bracket, evaluates
    all of them in one call of ``f`` and keeps the first sub-interval with a
    sign change, so a bracket narrows by ``points + 1`` per pass.
    """
    if points < 1:
        raise ValueError(f"points must be at least 1, got {points}")
    for b in brackets:
        if not b.valid:
            raise BracketInvalid(
                f"no sign change on [{b.lo}, {b.hi}]: f_lo={b.f_lo}, f_hi={b.f_hi}"
            )

    lo = np.array([b.lo for b in brackets], dtype=float)
    hi = np.array([b.hi for b in brackets], dtype=float)
    f_lo = np.array([b.f_lo for b in brackets], dtype=float)
    f_hi = np.array([b.f_hi for b in brackets], dtype=float)
    roots = np.full(lo.size, np.nan)
    fractions = np.arange(1, points + 1) / (points + 1)

    passes = 0
    while True:
        open_ = np.isnan(roots) & (hi - lo > tol)
        if not open_.any():
            break
        idx = np.flatnonzero(open_)
        nodes = lo[idx, None] + (hi - lo)[idx, None] * fractions[None, :]
        values = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
        passes += 1

        for row, k in enumerate(idx):
            xs = np.concatenate(([lo[k]], nodes[row], [hi[k]]))
            fs = np.concatenate(([f_lo[k]], values[row], [f_hi[k]]))
            zero = np.flatnonzero(fs[1:-1] == 0.0)
            if zero.size:
                roots[k] = xs[1 + zero[0]]
                continue
            change = np.flatnonzero(fs[:-1] * fs[1:] < 0)
            if not change.size:
                # Only reachable when f is not deterministic; keep the bracket midpoint.
                logger.warning("Lost sign change on [%s, %s]", lo[k], hi[k])
                roots[k] = 0.5 * (lo[k] + hi[k])
                continue
            j = change[0]
            lo[k], hi[k], f_lo[k], f_hi[k] = xs[j], xs[j + 1], fs[j], fs[j + 1]

    done = np.isnan(roots)
    roots[done] = 0.5 * (lo[done] + hi[done])
    logger.debug("Refined %d brackets in %d passes", lo.size, passes)
    return sorted(float(r) for r in roots)


def split_node_glitches(
    roots: Sequence[float], grid: np.ndarray, atol: float
) -> Tuple[List[float], List[float]]:
    """Separate roots that close in on one grid node from both sides.

    Such a pair comes from a single sample of opposite sign, not from two
    zeros of ``f``. Returns the remaining roots and the energies of those nodes.
    """
    ordered = sorted(float(r) for r in roots)
    grid = np.asarray(grid, dtype=float)
    kept: List[float] = []
    glitches: List[float] = []
    k = 0
    while k < len(ordered):
        if k + 1 < len(ordered) and grid.size:
            node = float(grid[np.argmin(np.abs(grid - ordered[k]))])
            if abs(ordered[k] - node) <= atol and abs(ordered[k + 1] - node) <= atol:
                logger.debug("Sign change at the single node E=%s discarded", node)
                glitches.append(node)
                k += 2
                continue
        kept.append(ordered[k])
        k += 1
    return kept, glitches
