"""Shooting propagation of ``-psi'' + (W - E) psi = 0`` along a contour.

The equation is integrated in the contour parameter ``t`` as the first-order
system

    d psi / dt  = x'(t) * dpsi
    d dpsi / dt = x'(t) * (W(t) - E) * psi

with ``dpsi = d psi / dx``, using classical fixed-step RK4. Two solutions start
at ``t = 0`` from ``(psi, dpsi) = (0, 1)`` and ``(1, 0)`` and are advanced in
lockstep; energies are batched along the last array axis so that a whole energy
grid is propagated in one pass.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from toboggan_spectra.contour import ContourSpec, sample
from toboggan_spectra.potential import PotentialSpec, values

logger = logging.getLogger(__name__)


class NonFiniteState(ArithmeticError):
    """Raised when the propagated state contains NaN or Inf."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    renorm_threshold: float = 1e100
    max_dt: float = 0.01
    tighten_above: float = 1.6
    tighten_factor: float = 4.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dt > self.max_dt:
            raise ValueError(f"dt must not exceed {self.max_dt}, got {self.dt}")
        if not self.renorm_threshold > 1:
            raise ValueError(
                f"renorm_threshold must be greater than 1, got {self.renorm_threshold}"
            )
        if self.tighten_factor < 1:
            raise ValueError(f"tighten_factor must be >= 1, got {self.tighten_factor}")

    def step_for(self, epsilon: float) -> float:
        """Effective step; solutions near epsilon = 2 need a finer grid."""
        if epsilon > self.tighten_above:
            return self.dt / self.tighten_factor
        return self.dt


@dataclass(frozen=True)
class StateVector:
    psi: complex
    dpsi: complex


@dataclass(frozen=True)
class SolutionPair:
    s1: StateVector
    s2: StateVector
    logscale1: float = 0.0
    logscale2: float = 0.0
    t: float = 0.0


@dataclass
class PairBatch:
    """Both solutions for a batch of energies; row 0 is psi_1, row 1 is psi_2."""

    energies: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    logscale: np.ndarray
    t: float
    renormalizations: int = 0

    def pair(self, index: int = 0) -> SolutionPair:
        return SolutionPair(
            s1=StateVector(complex(self.psi[0, index]), complex(self.dpsi[0, index])),
            s2=StateVector(complex(self.psi[1, index]), complex(self.dpsi[1, index])),
            logscale1=float(self.logscale[0, index]),
            logscale2=float(self.logscale[1, index]),
            t=self.t,
        )


def step_grid(spec: ContourSpec, t_target: float, dt: float) -> np.ndarray:
    """Nodes from 0 to ``|t_target|``; the circle-tail junction is always a node."""
    stop = abs(t_target)
    breaks = [0.0]
    if 0.0 < spec.junction < stop:
        breaks.append(spec.junction)
    breaks.append(stop)
    pieces = [np.zeros(1)]
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        pieces.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(pieces)


@lru_cache(maxsize=8)
def _coefficients(
    spec: ContourSpec, epsilon: float, dt: float, direction: int, t_target: float
) -> Tuple[list, list, list, list, list]:
    nodes = direction * step_grid(spec, t_target, dt)
    h = np.diff(nodes)
    mids = nodes[:-1] + 0.5 * h
    pspec = PotentialSpec(epsilon)

    x_n, dx_n, th_n = sample(spec, nodes)
    x_m, dx_m, th_m = sample(spec, mids)
    w_n = values(pspec, x_n, th_n)
    w_m = values(pspec, x_m, th_m)
    logger.debug(
        "Built %d-step grid for %s, epsilon=%s, direction=%+d", h.size, spec, epsilon, direction
    )
    return h.tolist(), dx_n.tolist(), dx_m.tolist(), w_n.tolist(), w_m.tolist()


def propagate_batch(
    spec: ContourSpec,
    pspec: PotentialSpec,
    energies,
    direction: int,
    cfg: IntegratorConfig,
    t_target: Optional[float] = None,
    initial: Optional[Tuple[StateVector, StateVector]] = None,
) -> PairBatch:
    """Propagate both shooting solutions from ``t = 0`` to ``direction * t_target``.

    ``initial`` overrides the starting states ``(0, 1)`` and ``(1, 0)``.
    """
    pspec.require_solver_range()
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction}")
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    if not np.all(np.isfinite(E)):
        raise ValueError("energies must be finite")

    stop = spec.half_length if t_target is None else abs(float(t_target))
    dt = cfg.step_for(pspec.epsilon)
    h, dx_n, dx_m, w_n, w_m = _coefficients(spec, pspec.epsilon, dt, direction, stop)

    n = E.size
    psi = np.zeros((2, n), dtype=complex)
    dpsi = np.zeros((2, n), dtype=complex)
    if initial is None:
        psi[1] = 1.0
        dpsi[0] = 1.0
    else:
        for row, state in enumerate(initial):
            psi[row] = state.psi
            dpsi[row] = state.dpsi
    logscale = np.zeros((2, n))
    threshold = cfg.renorm_threshold
    renormalizations = 0

    with np.errstate(over="ignore", invalid="ignore"):
        for k, hk in enumerate(h):
            a0, am, a1 = dx_n[k], dx_m[k], dx_n[k + 1]
            q0 = a0 * (w_n[k] - E)
            qm = am * (w_m[k] - E)
            q1 = a1 * (w_n[k + 1] - E)
            half = 0.5 * hk

            k1p = a0 * dpsi
            k1d = q0 * psi
            k2p = am * (dpsi + half * k1d)
            k2d = qm * (psi + half * k1p)
            k3p = am * (dpsi + half * k2d)
            k3d = qm * (psi + half * k2p)
            k4p = a1 * (dpsi + hk * k3d)
            k4d = q1 * (psi + hk * k3p)

            sixth = hk / 6.0
            psi = psi + sixth * (k1p + 2.0 * (k2p + k3p) + k4p)
            dpsi = dpsi + sixth * (k1d + 2.0 * (k2d + k3d) + k4d)

            magnitude = np.maximum(np.abs(psi), np.abs(dpsi))
            over = magnitude > threshold
            if over.any():
                # Positive real factors keep the sign of Re[conj(psi_1) psi_2].
                factor = np.where(over, magnitude, 1.0)
                psi /= factor
                dpsi /= factor
                logscale += np.log(factor)
                renormalizations += int(over.sum())

    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(dpsi))):
        raise NonFiniteState(
            f"non-finite state at t={direction * stop} for epsilon={pspec.epsilon}; "
            f"reduce dt (currently {dt}) or check the epsilon range"
        )
    logger.debug("Propagation to t=%s used %d renormalizations", direction * stop, renormalizations)
    return PairBatch(
        energies=E,
        psi=psi,
        dpsi=dpsi,
        logscale=logscale,
        t=direction * stop,
        renormalizations=renormalizations,
    )


def propagate(
    spec: ContourSpec,
    pspec: PotentialSpec,
    E: float,
    direction: int,
    cfg: IntegratorConfig,
    t_target: Optional[float] = None,
    initial: Optional[Tuple[StateVector, StateVector]] = None,
) -> SolutionPair:
    return propagate_batch(
        spec, pspec, [E], direction, cfg, t_target=t_target, initial=initial
    ).pair(0)


def wronskian(pair: SolutionPair) -> complex:
    """``psi_1 dpsi_2 - dpsi_1 psi_2`` in true units; equals -1 for exact solutions."""
    scaled = pair.s1.psi * pair.s2.dpsi - pair.s1.dpsi * pair.s2.psi
    with np.errstate(over="ignore"):
        return complex(scaled * np.exp(pair.logscale1 + pair.logscale2))


def wronskian_defect(pair: SolutionPair) -> float:
    """Distance of the Wronskian from -1 relative to the size of its two products."""
    a = pair.s1.psi * pair.s2.dpsi
    b = pair.s1.dpsi * pair.s2.psi
    target = math.exp(-(pair.logscale1 + pair.logscale2))
    return abs(a - b + target) / (abs(a) + abs(b))
