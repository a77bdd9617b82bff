import math

import numpy as np
import pytest

from toboggan_spectra.contour import ContourPoint, ContourSpec, point, sample
from toboggan_spectra.potential import (
    PotentialSpec,
    potential_sample,
    value,
    values,
    verify_pt_potential,
)

# ── value ─────────────────────────────────────────────────────────


@pytest.mark.parametrize("epsilon", [-0.9, -0.3, 0.0, 0.5, 1.0, 1.7, 3.2])
@pytest.mark.parametrize("winding", [0, 1, 2])
def test_anchor_value_is_minus_one(epsilon, winding):
    W = value(PotentialSpec(epsilon), point(ContourSpec(winding=winding), 0.0))
    assert W == pytest.approx(-1 + 0j, abs=1e-14)


def test_epsilon_zero_is_x_squared():
    p = point(ContourSpec(winding=0), 1.0)
    assert value(PotentialSpec(0.0), p) == pytest.approx(-2j)


@pytest.mark.parametrize("winding", [0, 1, 2])
def test_epsilon_zero_equals_x_squared_along_contour(winding):
    spec = ContourSpec(winding=winding)
    t = np.linspace(-spec.half_length, spec.half_length, 4001)
    x, _, theta = sample(spec, t)
    np.testing.assert_allclose(values(PotentialSpec(0.0), x, theta), x**2, rtol=1e-12, atol=1e-12)


def test_cubic_at_single_winding_junction():
    W = value(PotentialSpec(1.0), point(ContourSpec(winding=1), math.pi))
    assert W == pytest.approx(1 + 0j, abs=1e-12)


def test_principal_sheet_matches_principal_power():
    # Along the straight line arg(ix) stays in (-pi/2, pi/2), so numpy's
    # principal power agrees with the continued phase.
    spec = ContourSpec(winding=0)
    t = np.linspace(-10, 10, 101)
    x, _, theta = sample(spec, t)
    eps = 0.37
    expected = x**2 * (1j * x) ** eps
    np.testing.assert_allclose(values(PotentialSpec(eps), x, theta), expected, rtol=1e-12)


@pytest.mark.parametrize("epsilon", [0.0, 1.0])
def test_integer_epsilon_is_single_valued(epsilon):
    # Points with equal x on the lambda = 2 tail and the lambda = 0 line.
    tail = ContourSpec(winding=2)
    line = ContourSpec(winding=0)
    for s in (0.5, 3.0, 7.0):
        on_tail = point(tail, tail.junction + s)
        on_line = point(line, s)
        assert on_tail.x == pytest.approx(on_line.x)
        pspec = PotentialSpec(epsilon)
        assert value(pspec, on_tail) == pytest.approx(value(pspec, on_line), rel=1e-12)


def test_non_integer_epsilon_depends_on_sheet():
    tail = ContourSpec(winding=2)
    line = ContourSpec(winding=0)
    pspec = PotentialSpec(0.5)
    assert value(pspec, point(tail, tail.junction + 3.0)) != pytest.approx(
        value(pspec, point(line, 3.0)), rel=1e-6
    )


def test_branch_point_rejected():
    with pytest.raises(ValueError):
        value(PotentialSpec(0.5), ContourPoint(t=0.0, x=0j, dx=1 + 0j, theta=0.0))


def test_potential_sample_carries_t():
    s = potential_sample(PotentialSpec(0.5), ContourSpec(winding=1), 0.0)
    assert s.t == 0.0
    assert s.W == pytest.approx(-1 + 0j, abs=1e-14)


# ── verify_pt_potential ───────────────────────────────────────────


@pytest.mark.parametrize("epsilon", [-0.7, 0.0, 0.3, 0.5, 1.0, 1.9])
@pytest.mark.parametrize("winding", [0, 1, 2, 3])
def test_pt_identity_on_canonical_contours(epsilon, winding):
    assert verify_pt_potential(PotentialSpec(epsilon), ContourSpec(winding=winding), 2000)


def test_anchor_on_wrong_sheet_breaks_pt():
    spec = ContourSpec(winding=1, anchor_sheet=1)
    assert not verify_pt_potential(PotentialSpec(0.3), spec, 500)


def test_anchor_shift_is_harmless_for_half_integer_two_epsilon():
    # A 2*pi shift multiplies W by exp(2*pi*i*epsilon), a real factor when 2*epsilon is an integer.
    spec = ContourSpec(winding=1, anchor_sheet=1)
    assert verify_pt_potential(PotentialSpec(0.5), spec, 500)


def test_mirrored_contour_breaks_pt():
    spec = ContourSpec(winding=1, mirrored=True)
    assert not verify_pt_potential(PotentialSpec(0.3), spec, 500)


def test_verify_needs_two_samples():
    with pytest.raises(ValueError):
        verify_pt_potential(PotentialSpec(0.5), ContourSpec(), 1)


# ── PotentialSpec ─────────────────────────────────────────────────


@pytest.mark.parametrize("epsilon", [-1.0, 2.0, 2.5, -1.2])
def test_solver_range_is_open(epsilon):
    pspec = PotentialSpec(epsilon)
    assert not pspec.in_solver_range
    with pytest.raises(ValueError):
        pspec.require_solver_range()


@pytest.mark.parametrize("epsilon", [float("nan"), float("inf")])
def test_non_finite_epsilon_rejected(epsilon):
    with pytest.raises(ValueError):
        PotentialSpec(epsilon)
