import math

import numpy as np
import pytest

from toboggan_spectra.contour import (
    ContourSpec,
    endpoints,
    point,
    sample,
    verify_pt_geometry,
)

# ── point ─────────────────────────────────────────────────────────


@pytest.mark.parametrize("winding", [0, 1, 2, 3])
def test_anchor_is_minus_i_on_principal_sheet(winding):
    p = point(ContourSpec(winding=winding), 0.0)
    assert p.x == pytest.approx(-1j, abs=1e-15)
    assert p.theta == -math.pi / 2


def test_straight_line_contour():
    p = point(ContourSpec(winding=0), 5.0)
    assert p.x == pytest.approx(5 - 1j)
    assert p.dx == pytest.approx(1 + 0j)


def test_straight_line_matches_t_minus_i_everywhere():
    t = np.linspace(-10, 10, 201)
    x, dx, _ = sample(ContourSpec(winding=0), t)
    np.testing.assert_allclose(x, t - 1j, atol=1e-15)
    np.testing.assert_allclose(dx, np.ones_like(t))


def test_single_winding_junction_and_tail():
    spec = ContourSpec(winding=1)
    junction = point(spec, math.pi)
    assert junction.x == pytest.approx(1j, abs=1e-15)
    assert junction.theta == pytest.approx(math.pi / 2)

    tail = point(spec, math.pi + 3)
    assert tail.x == pytest.approx(-3 + 1j)
    assert tail.dx == pytest.approx(-1 + 0j)
    # On a single sheet turn the continuous phase equals the principal argument.
    assert tail.theta == pytest.approx(np.angle(-3 + 1j))


@pytest.mark.parametrize("winding", [0, 1, 2])
def test_unit_speed(winding):
    spec = ContourSpec(winding=winding)
    t = np.linspace(-spec.half_length, spec.half_length, 5001)
    _, dx, _ = sample(spec, t)
    np.testing.assert_allclose(np.abs(dx), 1.0, atol=1e-14)


@pytest.mark.parametrize("winding", [1, 2, 3])
def test_junction_is_c1(winding):
    spec = ContourSpec(winding=winding)
    for sign in (1, -1):
        inner = point(spec, sign * spec.junction)
        outer = point(spec, sign * (spec.junction + 1e-10))
        assert abs(inner.x - outer.x) < 1e-9
        assert abs(inner.dx - outer.dx) < 1e-9
        assert abs(inner.theta - outer.theta) < 1e-9


@pytest.mark.parametrize("winding", [0, 1, 2, 3])
def test_total_winding(winding):
    spec = ContourSpec(winding=winding)
    plus, minus = point(spec, spec.junction), point(spec, -spec.junction)
    assert plus.theta - minus.theta == pytest.approx(2 * math.pi * winding)


@pytest.mark.parametrize("winding", [0, 1, 2])
def test_theta_is_continuous(winding):
    spec = ContourSpec(winding=winding)
    t, step = np.linspace(-spec.half_length, spec.half_length, 20001, retstep=True)
    _, _, theta = sample(spec, t)
    assert np.max(np.abs(np.diff(theta))) < 2 * step


def test_anchor_sheet_shifts_phase():
    t = np.linspace(-5, 5, 11)
    _, _, base = sample(ContourSpec(winding=1), t)
    _, _, shifted = sample(ContourSpec(winding=1, anchor_sheet=1), t)
    np.testing.assert_allclose(shifted - base, 2 * math.pi)


def test_mirrored_contour_starts_above_origin():
    p = point(ContourSpec(winding=1, mirrored=True), 0.0)
    assert p.x == pytest.approx(1j, abs=1e-15)
    assert p.theta == pytest.approx(math.pi / 2)


# ── endpoints ─────────────────────────────────────────────────────


def test_endpoints_straight_line():
    spec = ContourSpec(winding=0, tail_extent=10)
    t_minus, t_plus = endpoints(spec)
    assert (t_minus, t_plus) == (-10, 10)
    assert point(spec, t_plus).x == pytest.approx(10 - 1j)


@pytest.mark.parametrize(
    "winding,tail,expected",
    [(1, 10.0, math.pi + 10), (2, 5.0, 2 * math.pi + 5)],
)
def test_endpoints_offset_by_junction(winding, tail, expected):
    spec = ContourSpec(winding=winding, tail_extent=tail)
    t_minus, t_plus = endpoints(spec)
    assert t_plus == pytest.approx(expected)
    assert t_minus == -t_plus
    x_plus, x_minus = point(spec, t_plus).x, point(spec, t_minus).x
    assert abs(x_plus.real) == pytest.approx(tail)
    assert x_minus == pytest.approx(-np.conj(x_plus))


# ── verify_pt_geometry ────────────────────────────────────────────


@pytest.mark.parametrize("winding", [0, 1, 2, 3])
def test_canonical_contours_are_pt_symmetric(winding):
    assert verify_pt_geometry(ContourSpec(winding=winding), 10_000)


def test_mirrored_contour_breaks_phase_condition():
    assert not verify_pt_geometry(ContourSpec(winding=1, mirrored=True), 1000)


def test_verify_needs_two_samples():
    with pytest.raises(ValueError):
        verify_pt_geometry(ContourSpec(), 1)


# ── ContourSpec validation ────────────────────────────────────────


@pytest.mark.parametrize(
    "kwargs",
    [
        {"winding": -1},
        {"winding": 1.5},
        {"winding": True},
        {"radius": 2.0},
        {"tail_extent": 4.0},
    ],
)
def test_invalid_spec_rejected(kwargs):
    with pytest.raises(ValueError):
        ContourSpec(**kwargs)


def test_tail_floor_is_configurable():
    spec = ContourSpec(tail_extent=3.0, min_tail_extent=2.0)
    assert spec.half_length == 3.0
