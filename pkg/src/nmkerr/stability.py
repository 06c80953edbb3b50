"""Stability classification of steady states and phase diagrams.

Two routes are implemented.  For the two-mode interference kernel the full
4x4 quadrature linearization is diagonalized, which is exact.  For any other
kernel the adiabatic surrogate

    Re lambda = -(kappa+ + kappa-)/2 - (Delta/Omega)(kappa+ - kappa-)/2

classifies modulational instability, with the fold (saddle) band flagged by
an imaginary relaxation frequency.  A positive real eigenvalue with
appreciable imaginary part marks self-pulsing gain; a positive real
eigenvalue without one is the ordinary fold instability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import FriedrichWintgen, SystemParams, WithBackground
from .noise import LinearizedPoint, UnstablePointError
from .steadystate import Drive, StabilityClass


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: tuple[complex, ...] | None
    stability: StabilityClass
    mi_gain: float
    pulse_freq_prediction: float
    re_lambda_max: float
    im_lambda: float


@dataclass(frozen=True)
class PhaseDiagram:
    omega_p: np.ndarray
    n: np.ndarray
    classes: np.ndarray          # StabilityClass values, shape (len(n), len(omega_p))
    mi_gain: np.ndarray
    re_lambda_max: np.ndarray
    im_lambda: np.ndarray


def _fw_parts(system: SystemParams):
    kernel = system.kernel
    bg = 0.0
    if isinstance(kernel, WithBackground):
        bg = kernel.kappa_bg
        kernel = kernel.inner
    if not isinstance(kernel, FriedrichWintgen):
        raise ValueError("fw_matrix needs a FriedrichWintgen kernel (optionally with background)")
    return kernel, bg


def fw_matrix(system: SystemParams, drive: Drive, n: float) -> np.ndarray:
    """Quadrature linearization over (dX_a, dY_a, dX_d, dY_d), entries in rate units."""
    kern, bg = _fw_parts(system)
    bn = system.beta * n
    w_ap = system.omega_a - drive.omega_p
    w_dp = kern.omega_d - drive.omega_p
    cross = math.sqrt(kern.kappa * kern.gamma)
    k = kern.kappa + bg
    g = kern.gamma
    return np.array(
        [
            [-k, w_ap + bn, -cross, 0.0],
            [-(w_ap + 3.0 * bn), -k, 0.0, -cross],
            [-cross, 0.0, -g, w_dp],
            [0.0, -cross, -w_dp, -g],
        ]
    )


def _fw_matrices(system: SystemParams, omega_p, n):
    """Stacked matrices for broadcast grids of omega_p and n."""
    kern, bg = _fw_parts(system)
    omega_p = np.asarray(omega_p, dtype=float)
    n = np.asarray(n, dtype=float)
    bn = system.beta * n
    w_ap = system.omega_a - omega_p
    w_dp = kern.omega_d - omega_p
    cross = math.sqrt(kern.kappa * kern.gamma)
    k = kern.kappa + bg
    g = kern.gamma
    shape = np.broadcast(w_ap, bn).shape
    mats = np.zeros(shape + (4, 4))
    mats[..., 0, 0] = -k
    mats[..., 0, 1] = w_ap + bn
    mats[..., 0, 2] = -cross
    mats[..., 1, 0] = -(w_ap + 3.0 * bn)
    mats[..., 1, 1] = -k
    mats[..., 1, 3] = -cross
    mats[..., 2, 0] = -cross
    mats[..., 2, 2] = -g
    mats[..., 2, 3] = w_dp
    mats[..., 3, 1] = -cross
    mats[..., 3, 2] = -w_dp
    mats[..., 3, 3] = -g
    return mats


def default_epsilon(system: SystemParams) -> float:
    kernel = system.kernel
    if isinstance(kernel, WithBackground):
        kernel = kernel.inner
    if isinstance(kernel, FriedrichWintgen):
        return 1e-6 * (kernel.kappa + kernel.gamma)
    return 1e-6 * max(kernel.rate_scale, 1e-300)


def adiabatic_re_lambda(system: SystemParams, drive: Drive, n: float) -> float:
    """Kernel-general damping rate of the relaxation sidebands (growth if > 0)."""
    point = LinearizedPoint.from_drive(system, drive, n)
    if point.in_saddle_band:
        raise UnstablePointError("inside saddle band: Omega is imaginary")
    omega_r = point.omega_relax
    if omega_r == 0.0:
        raise UnstablePointError("on the fold boundary: Omega = 0")
    kp = float(np.real(system.kernel.loss(drive.omega_p + omega_r)))
    km = float(np.real(system.kernel.loss(drive.omega_p - omega_r)))
    return -(kp + km) / 2.0 - (point.delta / omega_r) * (kp - km) / 2.0


def _classify_eigs(eigs: np.ndarray, epsilon: float):
    re = eigs.real
    im = eigs.imag
    re_max = float(np.max(re))
    idx = int(np.argmax(re))
    unstable = re > epsilon
    if not np.any(unstable):
        cls = StabilityClass.STABLE
    elif np.any(unstable & (np.abs(im) < epsilon)):
        cls = StabilityClass.SADDLE_UNSTABLE
    else:
        cls = StabilityClass.MI_UNSTABLE
    # the relevant pair for pulsing: largest real part among oscillatory modes
    osc = np.abs(im) >= epsilon
    if np.any(osc):
        lead = int(np.argmax(np.where(osc, re, -np.inf)))
        pulse = abs(float(im[lead]))
    else:
        pulse = 0.0
    mi_gain = re_max if cls is StabilityClass.MI_UNSTABLE else 0.0
    return cls, re_max, abs(float(im[idx])), mi_gain, pulse


def classify(
    system: SystemParams, drive: Drive, n: float, epsilon: float | None = None
) -> StabilityReport:
    """Stable / fold-unstable / MI-unstable at one working point.

    The pulsing-frequency prediction is the imaginary part of the leading
    oscillatory eigenvalue, i.e. sqrt(Omega^2 - (Gamma/2)^2) with Gamma the
    pair's decay rate.
    """
    if epsilon is None:
        epsilon = default_epsilon(system)
    kernel = system.kernel
    is_fw = isinstance(kernel, FriedrichWintgen) or (
        isinstance(kernel, WithBackground) and isinstance(kernel.inner, FriedrichWintgen)
    )
    if is_fw:
        eigs = np.linalg.eigvals(fw_matrix(system, drive, n))
        cls, re_max, im_at_max, mi_gain, pulse = _classify_eigs(eigs, epsilon)
        return StabilityReport(
            eigenvalues=tuple(sorted(map(complex, eigs), key=lambda z: -z.real)),
            stability=cls,
            mi_gain=mi_gain,
            pulse_freq_prediction=pulse,
            re_lambda_max=re_max,
            im_lambda=im_at_max,
        )

    point = LinearizedPoint.from_drive(system, drive, n)
    if point.in_saddle_band:
        return StabilityReport(
            eigenvalues=None,
            stability=StabilityClass.SADDLE_UNSTABLE,
            mi_gain=0.0,
            pulse_freq_prediction=0.0,
            re_lambda_max=math.nan,
            im_lambda=0.0,
        )
    re_lam = adiabatic_re_lambda(system, drive, n)
    omega_r = point.omega_relax
    cls = StabilityClass.MI_UNSTABLE if re_lam > epsilon else StabilityClass.STABLE
    pulse2 = omega_r**2 - re_lam**2
    pulse = math.sqrt(pulse2) if pulse2 > 0 else 0.0
    return StabilityReport(
        eigenvalues=None,
        stability=cls,
        mi_gain=re_lam if cls is StabilityClass.MI_UNSTABLE else 0.0,
        pulse_freq_prediction=pulse,
        re_lambda_max=re_lam,
        im_lambda=omega_r,
    )


_CLASS_CODE = {
    StabilityClass.STABLE: 0,
    StabilityClass.SADDLE_UNSTABLE: 1,
    StabilityClass.MI_UNSTABLE: 2,
}


def phase_diagram(
    system: SystemParams,
    omega_p_grid,
    n_grid,
    epsilon: float | None = None,
) -> PhaseDiagram:
    """Classification over an (omega_p, n) grid, parameterized by photon number.

    Rows index n, columns omega_p.  Fold regions where the flux map bends
    back are rendered unfolded since n itself is the coordinate.
    """
    if epsilon is None:
        epsilon = default_epsilon(system)
    omega_p_grid = np.asarray(omega_p_grid, dtype=float)
    n_grid = np.asarray(n_grid, dtype=float)
    if np.any(np.diff(omega_p_grid) < 0) or np.any(np.diff(n_grid) < 0):
        raise ValueError("grids must be ascending")
    kernel = system.kernel
    is_fw = isinstance(kernel, FriedrichWintgen) or (
        isinstance(kernel, WithBackground) and isinstance(kernel.inner, FriedrichWintgen)
    )
    W, N = np.meshgrid(omega_p_grid, n_grid)
    shape = W.shape
    classes = np.zeros(shape, dtype=int)
    mi_gain = np.zeros(shape)
    re_max = np.zeros(shape)
    im_max = np.zeros(shape)

    if is_fw:
        mats = _fw_matrices(system, W, N)
        eigs = np.linalg.eigvals(mats.reshape(-1, 4, 4)).reshape(shape + (4,))
        re = eigs.real
        im = eigs.imag
        re_max = re.max(axis=-1)
        lead = re.argmax(axis=-1)
        im_max = np.abs(np.take_along_axis(im, lead[..., None], axis=-1))[..., 0]
        any_saddle = np.any((re > epsilon) & (np.abs(im) < epsilon), axis=-1)
        any_pos = re_max > epsilon
        classes = np.where(any_pos, np.where(any_saddle, 1, 2), 0)
        mi_gain = np.where(classes == 2, re_max, 0.0)
    else:
        bn = system.beta * N
        delta = system.omega_a - W + 2.0 * bn
        omega_sq = delta**2 - bn**2
        saddle = omega_sq < 0
        omega_r = np.sqrt(np.where(saddle, np.nan, omega_sq))
        kp = np.real(kernel.loss(W + omega_r))
        km = np.real(kernel.loss(W - omega_r))
        with np.errstate(invalid="ignore", divide="ignore"):
            re_max = -(kp + km) / 2.0 - (delta / omega_r) * (kp - km) / 2.0
        classes = np.where(saddle, 1, np.where(re_max > epsilon, 2, 0))
        mi_gain = np.where(classes == 2, re_max, 0.0)
        im_max = np.where(saddle, 0.0, omega_r)
        re_max = np.where(saddle, np.nan, re_max)

    return PhaseDiagram(
        omega_p=omega_p_grid,
        n=n_grid,
        classes=classes,
        mi_gain=mi_gain,
        re_lambda_max=re_max,
        im_lambda=im_max,
    )
