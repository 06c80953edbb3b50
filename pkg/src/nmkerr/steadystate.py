"""Mean-field steady states of the driven Kerr resonance.

A monochromatic pump at omega_p samples the kernels at a single frequency, so
the steady-state photon number n obeys a cubic,

    [(delta + beta n)^2 + L^2] n = flux |K_c(omega_p)|^2,

with delta = omega_a - omega_p + Im K_l(omega_p) the total linear detuning and
L = Re K_l(omega_p) the pump-frequency loss.  For beta > 0 and pump blue of
the (shifted) resonance the cubic folds over and the cavity is bistable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .kernels import KernelModel, SystemParams


class UncoupledPumpError(Exception):
    """The pump frequency sits exactly on a dark point: |K_c(omega_p)| = 0."""


class StabilityClass(Enum):
    UNKNOWN = "unknown"
    STABLE = "stable"
    SADDLE_UNSTABLE = "saddle"
    MI_UNSTABLE = "mi"


@dataclass(frozen=True)
class Drive:
    """Monochromatic pump: frequency omega_p and incident flux |s0|^2."""

    omega_p: float
    flux: float

    def __post_init__(self):
        if self.flux < 0:
            raise ValueError("flux must be nonnegative")


@dataclass(frozen=True)
class SteadyState:
    n: float
    alpha0: complex
    omega_ap: float
    stability: StabilityClass = StabilityClass.UNKNOWN


@dataclass(frozen=True)
class BistabilityReport:
    delta: float
    threshold: float
    bistable: bool


@dataclass(frozen=True)
class BranchSweep:
    omega_p: float
    fluxes: np.ndarray
    roots: list[list[SteadyState]]
    turning_points: list[float]


def _pump_samples(system: SystemParams, omega_p: float):
    kl = complex(system.kernel.loss(omega_p))
    kc2 = abs(complex(system.kernel.coupling(omega_p))) ** 2
    delta = system.omega_a - omega_p + kl.imag
    return delta, kl.real, kc2


def steady_roots(system: SystemParams, drive: Drive) -> list[SteadyState]:
    """All real nonnegative photon-number roots, sorted ascending.

    The cubic is solved through the companion-matrix eigenvalues of
    ``numpy.roots`` rather than the closed-form radicals, which are
    ill-conditioned near the turning points.
    """
    delta, loss, kc2 = _pump_samples(system, drive.omega_p)
    omega_ap = system.omega_a - drive.omega_p
    power = drive.flux * kc2
    beta = system.beta

    if drive.flux == 0.0:
        return [SteadyState(n=0.0, alpha0=0j, omega_ap=omega_ap)]

    if beta == 0.0:
        n = power / (delta**2 + loss**2)
        return [SteadyState(n=float(n), alpha0=math.sqrt(max(n, 0.0)) + 0j, omega_ap=omega_ap)]

    coeffs = [beta**2, 2.0 * beta * delta, delta**2 + loss**2, -power]
    roots = np.roots(coeffs)
    scale = max(np.max(np.abs(roots)), 1.0)
    real = [r.real for r in roots if abs(r.imag) <= 1e-8 * scale]
    kept = []
    for n in sorted(real):
        if n < -1e-12 * scale:
            continue
        kept.append(max(n, 0.0))
    return [
        SteadyState(n=float(n), alpha0=math.sqrt(n) + 0j, omega_ap=omega_ap) for n in kept
    ]


def pump_for_n(system: SystemParams, omega_p: float, n: float) -> float:
    """Incident flux that sustains photon number n at pump omega_p."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    delta, loss, kc2 = _pump_samples(system, omega_p)
    if kc2 < 1e-24 * max(system.kernel.rate_scale, 1e-300):
        raise UncoupledPumpError(
            "uncoupled pump frequency: |K_c(omega_p)|^2 vanishes at omega_p = %g" % omega_p
        )
    return ((delta + system.beta * n) ** 2 + loss**2) * n / kc2


def bistability_threshold(system: SystemParams, omega_p: float) -> BistabilityReport:
    """Total-detuning criterion: bistable when -delta exceeds sqrt(3) * loss.

    delta = omega_a - omega_p + Im K_l(omega_p); with beta > 0 the fold only
    exists for pumping above the shifted resonance (delta < 0), which the
    sign of the comparison enforces.
    """
    if system.beta <= 0:
        raise ValueError("linear cavity cannot be bistable")
    delta, loss, _ = _pump_samples(system, omega_p)
    threshold = math.sqrt(3.0) * loss
    return BistabilityReport(delta=delta, threshold=threshold, bistable=(-delta) > threshold)


def turning_point_numbers(system: SystemParams, omega_p: float) -> list[float]:
    """Photon numbers where d(flux)/dn = 0 (edges of the fold), if any."""
    delta, loss, _ = _pump_samples(system, omega_p)
    beta = system.beta
    if beta == 0:
        return []
    disc = delta**2 - 3.0 * loss**2
    if disc <= 0:
        return []
    roots = [(-2.0 * delta - math.sqrt(disc)) / (3.0 * beta),
             (-2.0 * delta + math.sqrt(disc)) / (3.0 * beta)]
    return sorted(n for n in roots if n > 0)


def sweep_input_output(system: SystemParams, omega_p: float, flux_grid) -> BranchSweep:
    """Roots along a flux ramp plus bisected turning-point fluxes.

    Turning points are located by bisection on the change of root count to a
    relative flux precision of 1e-9.
    """
    fluxes = np.asarray(flux_grid, dtype=float)
    if np.any(np.diff(fluxes) < 0):
        raise ValueError("flux grid must be ascending")
    roots = [steady_roots(system, Drive(omega_p, float(f))) for f in fluxes]

    def count(f):
        return len(steady_roots(system, Drive(omega_p, float(f))))

    turning = []
    for f_lo, f_hi, r_lo, r_hi in zip(fluxes[:-1], fluxes[1:], roots[:-1], roots[1:]):
        if len(r_lo) == len(r_hi):
            continue
        a, b, ca = float(f_lo), float(f_hi), len(r_lo)
        while (b - a) > 1e-9 * max(b, 1e-300):
            mid = 0.5 * (a + b)
            if count(mid) == ca:
                a = mid
            else:
                b = mid
        turning.append(0.5 * (a + b))
    return BranchSweep(omega_p=omega_p, fluxes=fluxes, roots=roots, turning_points=turning)


def label_roots(roots: list[SteadyState], classes: list[StabilityClass]) -> list[SteadyState]:
    """Attach stability labels produced elsewhere to a root list."""
    if len(roots) != len(classes):
        raise ValueError("one class per root required")
    return [replace(r, stability=c) for r, c in zip(roots, classes)]
