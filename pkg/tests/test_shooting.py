import logging

import numpy as np
import pytest

from toboggan_spectra.contour import ContourSpec
from toboggan_spectra.integrator import IntegratorConfig
from toboggan_spectra.potential import PotentialSpec
from toboggan_spectra.shooting import (
    MismatchResult,
    det_mismatch,
    mismatch,
    mismatch_batch,
    mismatch_values,
    mismatch_with_det,
)

SHORT = ContourSpec(winding=0, tail_extent=7.0)


# ── mismatch ──────────────────────────────────────────────────────


@pytest.mark.parametrize("winding", [0, 1, 2])
@pytest.mark.parametrize("level", [1.0, 3.0, 5.0])
def test_sign_change_around_harmonic_levels(fast_integrator, winding, level):
    spec = ContourSpec(winding=winding, tail_extent=7.0)
    lo, hi = mismatch_values([level - 0.05, level + 0.05], spec, PotentialSpec(0.0), fast_integrator)
    assert lo * hi < 0


def test_no_sign_change_between_levels(fast_integrator):
    F = mismatch_values(np.linspace(1.2, 2.8, 9), SHORT, PotentialSpec(0.0), fast_integrator)
    assert np.all(np.sign(F) == np.sign(F[0]))


@pytest.mark.parametrize("winding,epsilon,E", [(0, 0.5, 1.7), (1, 0.5, 2.0), (2, -0.3, 0.8)])
def test_both_endpoints_agree(fast_integrator, winding, epsilon, E):
    spec = ContourSpec(winding=winding, tail_extent=7.0)
    pspec = PotentialSpec(epsilon)
    plus = mismatch(E, spec, pspec, fast_integrator, endpoint=1)
    minus = mismatch(E, spec, pspec, fast_integrator, endpoint=-1)
    assert minus.F == pytest.approx(plus.F, rel=1e-9, abs=1e-12)
    assert minus.logmag == pytest.approx(plus.logmag, rel=1e-9)


def test_single_value_matches_batch(fast_integrator):
    spec = ContourSpec(winding=1, tail_extent=7.0)
    pspec = PotentialSpec(0.5)
    energies = [0.5, 1.5, 2.5]
    batch = mismatch_values(energies, spec, pspec, fast_integrator)
    singles = [mismatch(E, spec, pspec, fast_integrator).F for E in energies]
    np.testing.assert_allclose(batch, singles, rtol=1e-13)


def test_result_carries_energy(fast_integrator):
    result = mismatch(1.5, SHORT, PotentialSpec(0.0), fast_integrator)
    assert isinstance(result, MismatchResult)
    assert result.E == 1.5
    assert result.det is None
    assert np.isfinite(result.F)


def test_conserved_wronskian_logs_no_warning(fast_integrator, caplog):
    with caplog.at_level(logging.WARNING):
        mismatch(2.0, ContourSpec(winding=1, tail_extent=7.0), PotentialSpec(0.5), fast_integrator)
    assert not caplog.records


def test_reduced_form_stays_finite_for_steep_growth(fast_integrator):
    spec = ContourSpec(winding=1)
    F, logmag = mismatch_batch([3.0], spec, PotentialSpec(1.5), fast_integrator)
    assert np.isfinite(F[0])
    assert logmag[0] > 100


def test_renormalization_threshold_does_not_change_mismatch():
    spec = ContourSpec(winding=0)
    pspec = PotentialSpec(0.0)
    energies = np.linspace(0.2, 6.2, 13)
    low = mismatch_values(energies, spec, pspec, IntegratorConfig(renorm_threshold=1e3))
    high = mismatch_values(energies, spec, pspec, IntegratorConfig(renorm_threshold=1e4))
    np.testing.assert_array_equal(np.sign(low), np.sign(high))
    np.testing.assert_allclose(low, high, rtol=1e-9, atol=1e-12)


# ── det_mismatch ──────────────────────────────────────────────────


@pytest.mark.parametrize("winding,epsilon,E", [(0, 0.0, 2.0), (1, 0.5, 2.0), (1, 1.0, 3.3)])
def test_determinant_is_twice_the_mismatch(fast_integrator, winding, epsilon, E):
    spec = ContourSpec(winding=winding, tail_extent=7.0)
    result = mismatch_with_det(E, spec, PotentialSpec(epsilon), fast_integrator)
    scale = max(1.0, abs(result.det))
    assert abs(result.det.imag) < 1e-9 * scale
    assert result.det.real == pytest.approx(2 * result.F, rel=1e-9, abs=1e-12)


def test_determinant_vanishes_at_eigenvalue(fast_integrator):
    pspec = PotentialSpec(0.0)
    assert abs(det_mismatch(1.0, SHORT, pspec, fast_integrator)) < 1e-5
    assert abs(det_mismatch(2.0, SHORT, pspec, fast_integrator)) > 1e-3
