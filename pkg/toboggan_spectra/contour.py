"""Tobogganic integration contours.

A contour with winding number ``lambda`` is a unit circle traversed ``lambda``
times around the branch point at the origin, centred at ``x = -i`` for ``t = 0``,
with straight tails parallel to the real axis attached tangentially at
``|t| = lambda * pi``::

    |t| <= lambda*pi :  x(t) = -i e^{it},                 theta(t) = -pi/2 + t
    |t| >  lambda*pi :  x(t) = (-1)^lambda (t - lambda*pi*sgn t - i)

``theta`` is the argument of ``x`` continued along the path and is never reduced
modulo 2*pi; it is what selects the Riemann sheet of the potential.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

ANCHOR_PHASE = -math.pi / 2


@dataclass(frozen=True)
class ContourSpec:
    winding: int = 0
    radius: float = 1.0
    tail_extent: float = 10.0
    min_tail_extent: float = 5.0
    anchor_sheet: int = 0
    mirrored: bool = False

    def __post_init__(self):
        if isinstance(self.winding, bool) or not isinstance(self.winding, int):
            raise ValueError(f"winding must be an integer, got {self.winding!r}")
        if self.winding < 0:
            raise ValueError(f"winding must be non-negative, got {self.winding}")
        if self.radius != 1.0:
            raise ValueError(f"only unit radius is supported, got {self.radius}")
        if self.tail_extent < self.min_tail_extent:
            raise ValueError(
                f"tail_extent must be at least {self.min_tail_extent}, got {self.tail_extent}"
            )

    @property
    def junction(self) -> float:
        """Parameter value where the circle meets the tails."""
        return self.winding * math.pi

    @property
    def half_length(self) -> float:
        return self.junction + self.tail_extent


@dataclass(frozen=True)
class ContourPoint:
    t: float
    x: complex
    dx: complex
    theta: float


def _canonical(winding: int, t: np.ndarray):
    lp = winding * math.pi
    orient = -1.0 if winding % 2 else 1.0
    sgn = np.sign(t)

    on_circle = np.abs(t) <= lp
    x_circle = np.sin(t) - 1j * np.cos(t)
    dx_circle = np.cos(t) + 1j * np.sin(t)
    theta_circle = ANCHOR_PHASE + t

    # Tails stay in one open half plane (|Im x| = 1), so the principal
    # argument of x / x_junction is the continuous phase increment.
    x_junction = -1j * orient
    x_tail = orient * ((t - lp * sgn) - 1j)
    theta_tail = ANCHOR_PHASE + lp * sgn + np.angle(x_tail / x_junction)

    x = np.where(on_circle, x_circle, x_tail)
    dx = np.where(on_circle, dx_circle, orient + 0j)
    theta = np.where(on_circle, theta_circle, theta_tail)
    return x, dx, theta


def sample(spec: ContourSpec, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized contour evaluation: returns ``(x, dx/dt, theta)`` arrays."""
    t = np.asarray(t, dtype=float)
    if spec.mirrored:
        x, dx, theta = _canonical(spec.winding, -t)
        x, dx, theta = np.conj(x), -np.conj(dx), -theta
    else:
        x, dx, theta = _canonical(spec.winding, t)
    if spec.anchor_sheet:
        theta = theta + 2 * math.pi * spec.anchor_sheet
    return x, dx, theta


def point(spec: ContourSpec, t: float) -> ContourPoint:
    x, dx, theta = sample(spec, t)
    return ContourPoint(t=float(t), x=complex(x), dx=complex(dx), theta=float(theta))


def endpoints(spec: ContourSpec) -> Tuple[float, float]:
    """Parameter values ``(t_minus, t_plus)`` at which ``|Re x| = tail_extent``."""
    return -spec.half_length, spec.half_length


def verify_pt_geometry(spec: ContourSpec, samples: int, atol: float = 1e-12) -> bool:
    """Check ``x(-t) = -conj x(t)`` and ``theta(-t) = -pi - theta(t)`` on a grid."""
    if samples < 2:
        raise ValueError(f"samples must be at least 2, got {samples}")
    t = np.linspace(0.0, spec.half_length, samples)
    x_p, _, th_p = sample(spec, t)
    x_m, _, th_m = sample(spec, -t)
    geometry_ok = bool(np.all(np.abs(x_m + np.conj(x_p)) <= atol))
    phase_ok = bool(np.all(np.abs(th_m + math.pi + th_p) <= atol))
    if not (geometry_ok and phase_ok):
        logger.debug(
            "PT geometry check failed for %s (geometry=%s, phase=%s)",
            spec,
            geometry_ok,
            phase_ok,
        )
    return geometry_ok and phase_ok
