"""Eigenvalue conditions built from the two shooting solutions.

For real ``E`` the PT symmetry of the potential makes ``psi_1`` odd and
``psi_2`` even under ``t -> -t`` combined with complex conjugation, so the
two-endpoint determinant collapses to the real condition

    Re[conj(psi_1(x_+)) psi_2(x_+)] = 0.

Both conditions are reported divided by ``|psi_1|^2`` (``|psi_1(x_+)||psi_1(x_-)|``
for the determinant), which keeps them finite and smooth in ``E`` while leaving
their signs untouched.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from toboggan_spectra.contour import ContourSpec
from toboggan_spectra.integrator import IntegratorConfig, PairBatch, propagate_batch
from toboggan_spectra.potential import PotentialSpec
from toboggan_spectra.validator import check_wronskian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MismatchResult:
    E: float
    F: float
    det: Optional[complex] = None
    logmag: float = 0.0


def _reduced(batch: PairBatch, orientation: int) -> Tuple[np.ndarray, np.ndarray]:
    p1, p2 = batch.psi[0], batch.psi[1]
    ls1, ls2 = batch.logscale[0], batch.logscale[1]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        modulus = np.abs(p1)
        F = orientation * np.real(np.conj(p1) * p2) / modulus**2 * np.exp(ls2 - ls1)
        logmag = 2.0 * (np.log(modulus) + ls1)
    return F, logmag


def mismatch_batch(
    energies,
    spec: ContourSpec,
    pspec: PotentialSpec,
    cfg: IntegratorConfig,
    endpoint: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """``(F, logmag)`` arrays for an array of energies."""
    batch = propagate_batch(spec, pspec, energies, endpoint, cfg)
    return _reduced(batch, endpoint)


def mismatch_values(
    energies,
    spec: ContourSpec,
    pspec: PotentialSpec,
    cfg: IntegratorConfig,
    endpoint: int = 1,
) -> np.ndarray:
    """Vectorized mismatch ``F(E)`` for an array of energies."""
    F, _ = mismatch_batch(energies, spec, pspec, cfg, endpoint)
    return F


def mismatch(
    E: float,
    spec: ContourSpec,
    pspec: PotentialSpec,
    cfg: IntegratorConfig,
    endpoint: int = 1,
) -> MismatchResult:
    """Mismatch at one energy, evaluated at ``t = endpoint * T``.

    The ``-T`` endpoint carries the orientation factor -1 (``psi_1`` is odd),
    so both endpoints give the same value.
    """
    batch = propagate_batch(spec, pspec, [E], endpoint, cfg)
    check_wronskian(batch.pair(0))
    F, logmag = _reduced(batch, endpoint)
    return MismatchResult(E=float(E), F=float(F[0]), logmag=float(logmag[0]))


def det_values(
    energies,
    spec: ContourSpec,
    pspec: PotentialSpec,
    cfg: IntegratorConfig,
) -> np.ndarray:
    plus = propagate_batch(spec, pspec, energies, 1, cfg)
    minus = propagate_batch(spec, pspec, energies, -1, cfg)
    p1p, p2p = plus.psi
    p1m, p2m = minus.psi
    l1p, l2p = plus.logscale
    l1m, l2m = minus.logscale
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        norm = np.abs(p1p) * np.abs(p1m)
        det = (p1p * p2m * np.exp(l2m - l1m) - p1m * p2p * np.exp(l2p - l1p)) / norm
    return det


def det_mismatch(
    E: float,
    spec: ContourSpec,
    pspec: PotentialSpec,
    cfg: IntegratorConfig,
) -> complex:
    """Two-endpoint determinant ``psi_1(x_+) psi_2(x_-) - psi_1(x_-) psi_2(x_+)``."""
    return complex(det_values([E], spec, pspec, cfg)[0])


def mismatch_with_det(
    E: float,
    spec: ContourSpec,
    pspec: PotentialSpec,
    cfg: IntegratorConfig,
) -> MismatchResult:
    result = mismatch(E, spec, pspec, cfg)
    det = det_mismatch(E, spec, pspec, cfg)
    if abs(det - 2.0 * result.F) > 1e-8 * max(1.0, abs(det)):
        logger.warning(
            "Determinant %s disagrees with 2F=%s at E=%s", det, 2.0 * result.F, E
        )
    return MismatchResult(E=result.E, F=result.F, det=det, logmag=result.logmag)
