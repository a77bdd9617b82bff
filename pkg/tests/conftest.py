"""Shared test fixtures.

The solver defaults (dt=1e-3, tails reaching |Re x| = 10) are sized for
production sweeps. Low-lying levels are already converged far below the test
tolerances with shorter tails and a coarser step, so most tests use the
``fast`` settings below and finish in seconds.

The ``fake_mismatch`` fixture replaces the shooting problem with a closed-form
function of (epsilon, E) whose roots are known exactly. Sweep bookkeeping
(window expansion, branch labels, merge detection, failure records) is tested
against it without integrating anything.
"""

from typing import Callable

import numpy as np
import pytest

from toboggan_spectra import spectrum
from toboggan_spectra.integrator import IntegratorConfig
from toboggan_spectra.spectrum import SolverConfig

FAST_INTEGRATOR = IntegratorConfig(dt=2e-3)
FAST = SolverConfig(tail_extent=7.0, integrator=FAST_INTEGRATOR, tol=1e-9)

HARMONIC_LEVELS = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0]


@pytest.fixture
def fast_cfg() -> SolverConfig:
    return FAST


@pytest.fixture
def fast_integrator() -> IntegratorConfig:
    return FAST_INTEGRATOR


def merging_pair(epsilon, E):
    """Roots at 1 and 3 plus a pair ``5 -+ sqrt(0.3 - epsilon)`` that merges at epsilon = 0.3."""
    E = np.asarray(E, dtype=float)
    return (E - 1.0) * (E - 3.0) * ((E - 5.0) ** 2 - (0.3 - epsilon))


@pytest.fixture
def fake_mismatch(monkeypatch) -> Callable:
    """Install ``func(epsilon, E)`` as the mismatch seen by ``spectrum``.

    ``growth(epsilon, E)`` stands in for the endpoint ``logmag`` used to confirm
    roots; every root counts as grown without it.
    """

    def _install(func=merging_pair, growth=None):
        def _mismatch_fn(epsilon, winding, cfg):
            return lambda E: func(epsilon, E)

        def _confirm_fn(epsilon, winding, cfg):
            def check(E):
                E = np.asarray(E, dtype=float)
                logmag = np.full(E.shape, 100.0) if growth is None else growth(epsilon, E)
                return func(epsilon, E), logmag

            return check

        monkeypatch.setattr(spectrum, "_mismatch_fn", _mismatch_fn)
        monkeypatch.setattr(spectrum, "_confirm_fn", _confirm_fn)
        return func

    return _install
