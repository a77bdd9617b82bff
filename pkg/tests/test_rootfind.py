import math
from functools import partial

import numpy as np
import pytest

from toboggan_spectra.contour import ContourSpec
from toboggan_spectra.potential import PotentialSpec
from toboggan_spectra.rootfind import (
    Bracket,
    BracketInvalid,
    RootConfig,
    bisect,
    refine_brackets,
    scan,
    split_node_glitches,
)
from toboggan_spectra.shooting import mismatch_values

from .conftest import FAST_INTEGRATOR, HARMONIC_LEVELS

HARMONIC = partial(
    mismatch_values,
    spec=ContourSpec(winding=0, tail_extent=7.0),
    pspec=PotentialSpec(0.0),
    cfg=FAST_INTEGRATOR,
)

# ── scan ──────────────────────────────────────────────────────────


def test_scan_simple_root():
    brackets, flags = scan(lambda E: E**2 - 4, RootConfig(0, 5, grid_step=0.5))
    assert len(brackets) == 1
    assert brackets[0].lo < 2 < brackets[0].hi
    assert flags == []


def test_scan_flags_tangential_zero():
    brackets, flags = scan(lambda E: (E - 2) ** 2, RootConfig(0, 5, grid_step=0.5))
    assert brackets == []
    assert flags == [pytest.approx(2.0)]


def test_scan_flags_near_miss_off_grid():
    brackets, flags = scan(lambda E: (E - 2.01) ** 2 + 1e-6, RootConfig(0, 5, grid_step=0.05))
    assert brackets == []
    assert len(flags) == 1
    assert flags[0] == pytest.approx(2.0, abs=0.05)


def test_scan_orders_brackets():
    brackets, _ = scan(np.sin, RootConfig(0.5, 10, grid_step=0.1))
    assert [round(b.lo + 0.05, 0) for b in brackets] == [3, 6, 9]
    assert all(b.valid for b in brackets)


def test_scan_rejects_wrong_shape():
    with pytest.raises(ValueError):
        scan(lambda E: np.zeros(3), RootConfig(0, 1, grid_step=0.1))


def test_scan_harmonic_mismatch():
    brackets, _ = scan(HARMONIC, RootConfig(0, 12, grid_step=0.05))
    assert len(brackets) == 6
    for b, level in zip(brackets, HARMONIC_LEVELS):
        assert b.lo <= level + 1e-6 and level - 1e-6 <= b.hi


def test_finer_grid_keeps_simple_roots():
    coarse, _ = scan(HARMONIC, RootConfig(0.3, 8, grid_step=0.1))
    fine, _ = scan(HARMONIC, RootConfig(0.3, 8, grid_step=0.025))
    coarse_roots = refine_brackets(HARMONIC, coarse, 1e-8)
    fine_roots = refine_brackets(HARMONIC, fine, 1e-8)
    assert len(fine_roots) >= len(coarse_roots) == 4
    for root in coarse_roots:
        assert min(abs(root - r) for r in fine_roots) < 1e-7


# ── RootConfig ────────────────────────────────────────────────────


def test_grid_spans_window():
    grid = RootConfig(-2, 3, grid_step=0.5).grid()
    assert grid[0] == -2 and grid[-1] == 3
    assert grid.size == 11


@pytest.mark.parametrize(
    "kwargs",
    [
        {"e_min": 1, "e_max": 1},
        {"e_min": 0, "e_max": 1, "grid_step": 0.0},
        {"e_min": 0, "e_max": 1, "grid_step": 2.0},
        {"e_min": 0, "e_max": 1, "tol": 0.0},
        {"e_min": 0, "e_max": 1, "flat_threshold": -1},
    ],
)
def test_invalid_root_config(kwargs):
    with pytest.raises(ValueError):
        RootConfig(**kwargs)


# ── bisect ────────────────────────────────────────────────────────


def test_bisect_linear():
    assert bisect(lambda E: E - 3, Bracket(2, 4, -1, 1), 1e-10) == pytest.approx(3, abs=1e-10)


def test_bisect_cubic():
    assert bisect(lambda E: E**3 - 8, Bracket(1, 3, -7, 19), 1e-10) == pytest.approx(2, abs=1e-10)


def test_bisect_respects_tolerance():
    root = bisect(math.cos, Bracket(1, 2, math.cos(1), math.cos(2)), 1e-6)
    assert abs(root - math.pi / 2) <= 1e-6


def test_bisect_harmonic_level():
    brackets, _ = scan(HARMONIC, RootConfig(4.5, 5.5, grid_step=0.05))
    assert len(brackets) == 1
    root = bisect(lambda E: HARMONIC(np.array([E]))[0], brackets[0], 1e-9)
    assert root == pytest.approx(5.0, abs=1e-5)


def test_bisect_rejects_bracket_without_sign_change():
    with pytest.raises(BracketInvalid):
        bisect(lambda E: E**2 + 1, Bracket(-1, 1, 2, 2), 1e-8)


def test_bracket_needs_ordered_ends():
    with pytest.raises(ValueError):
        Bracket(2, 1, -1, 1)


# ── refine_brackets ───────────────────────────────────────────────


def test_refine_agrees_with_bisect():
    brackets, _ = scan(np.sin, RootConfig(0.5, 10, grid_step=0.1))
    refined = refine_brackets(np.sin, brackets, 1e-12)
    single = [bisect(math.sin, b, 1e-12) for b in brackets]
    np.testing.assert_allclose(refined, single, atol=2e-12)
    np.testing.assert_allclose(refined, [math.pi, 2 * math.pi, 3 * math.pi], atol=1e-11)


def test_refine_returns_sorted_roots():
    brackets = [Bracket(2.5, 3.5, -1, 1), Bracket(0.5, 1.5, -1, 1)]
    roots = refine_brackets(lambda E: np.where(E < 2, E - 1, E - 3), brackets, 1e-10)
    assert roots == [pytest.approx(1, abs=1e-10), pytest.approx(3, abs=1e-10)]


def test_refine_rejects_invalid_bracket():
    with pytest.raises(BracketInvalid):
        refine_brackets(np.sin, [Bracket(0.5, 1.0, 0.4, 0.8)], 1e-8)


def test_refine_empty():
    assert refine_brackets(np.sin, [], 1e-8) == []


# ── split_node_glitches ───────────────────────────────────────────


def one_negative_sample(E):
    """Positive everywhere except on the grid node nearest 6."""
    E = np.asarray(E, dtype=float)
    return np.where(np.abs(E - 6.0) < 1e-9, -0.07, 0.1)


def test_single_sample_sign_change_is_a_glitch():
    cfg = RootConfig(e_min=0.0, e_max=10.0, grid_step=0.05, tol=1e-12)
    brackets, _ = scan(one_negative_sample, cfg)
    assert len(brackets) == 2
    roots = refine_brackets(one_negative_sample, brackets, cfg.tol)
    kept, glitches = split_node_glitches(roots, cfg.grid(), 1e-6 * cfg.grid_step)
    assert kept == []
    assert glitches == pytest.approx([6.0], abs=1e-12)


def test_close_pair_between_nodes_is_kept():
    grid = np.linspace(0.0, 10.0, 201)
    roots = [4.98, 5.02]
    assert split_node_glitches(roots, grid, 5e-8) == (roots, [])


def test_isolated_root_on_a_node_is_kept():
    grid = np.linspace(0.0, 10.0, 201)
    assert split_node_glitches([5.0, 7.3], grid, 5e-8) == ([5.0, 7.3], [])
