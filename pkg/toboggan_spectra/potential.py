"""The potential ``V(x) = x^2 (ix)^epsilon`` on its Riemann surface.

No branch cut is stored: the sheet is carried by the contour's continuous phase
``theta``, so ``log(ix) = ln|x| + i(theta + pi/2)`` and

    W = exp[(2 + epsilon)(ln|x| + i theta) + i epsilon pi / 2].

On the principal sheet (``theta(0) = -pi/2``) this gives ``V(-i) = -1``.

The companion potential ``x^2 (-ix)^epsilon`` is the reflection ``x -> -conj(x)``
of this one with an identical spectrum and is not modelled separately.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from toboggan_spectra.contour import ContourPoint, ContourSpec, sample

logger = logging.getLogger(__name__)

SOLVER_RANGE = (-1.0, 2.0)


@dataclass(frozen=True)
class PotentialSpec:
    epsilon: float

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite, got {self.epsilon}")

    @property
    def in_solver_range(self) -> bool:
        lo, hi = SOLVER_RANGE
        return lo < self.epsilon < hi

    def require_solver_range(self) -> None:
        """Horizontal tails leave the Stokes wedges outside (-1, 2)."""
        if not self.in_solver_range:
            lo, hi = SOLVER_RANGE
            raise ValueError(
                f"epsilon must lie in ({lo}, {hi}) for the solver, got {self.epsilon}"
            )


@dataclass(frozen=True)
class PotentialSample:
    t: float
    W: complex


def values(pspec: PotentialSpec, x, theta) -> np.ndarray:
    """Vectorized potential on the sheet selected by ``theta``."""
    modulus = np.abs(x)
    if np.any(modulus == 0):
        raise ValueError("potential is not defined at the branch point x = 0")
    eps = pspec.epsilon
    return np.exp((2.0 + eps) * (np.log(modulus) + 1j * np.asarray(theta)) + 0.5j * eps * math.pi)


def value(pspec: PotentialSpec, p: ContourPoint) -> complex:
    return complex(values(pspec, p.x, p.theta))


def potential_sample(pspec: PotentialSpec, spec: ContourSpec, t: float) -> PotentialSample:
    x, _, theta = sample(spec, t)
    return PotentialSample(t=float(t), W=complex(values(pspec, x, theta)))


def verify_pt_potential(
    pspec: PotentialSpec, spec: ContourSpec, samples: int, rtol: float = 1e-12
) -> bool:
    """Check ``W(-t) = conj W(t)`` along the contour, relative to ``max(1, |W|)``."""
    if samples < 2:
        raise ValueError(f"samples must be at least 2, got {samples}")
    t = np.linspace(0.0, spec.half_length, samples)
    x_p, _, th_p = sample(spec, t)
    x_m, _, th_m = sample(spec, -t)
    w_p = values(pspec, x_p, th_p)
    w_m = values(pspec, x_m, th_m)
    scale = np.maximum(1.0, np.abs(w_p))
    ok = bool(np.all(np.abs(w_m - np.conj(w_p)) <= rtol * scale))
    if not ok:
        logger.debug("PT potential check failed for epsilon=%s on %s", pspec.epsilon, spec)
    return ok
