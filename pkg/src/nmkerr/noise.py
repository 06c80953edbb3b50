"""Linearized quantum noise of the driven steady state.

Fluctuations about a steady state with photon number n obey a 2x2 linear
system coupling delta-a(omega) to its conjugate at -omega.  Solving it gives
transfer functions p and q onto the vacuum input, and the quadrature
variances follow as frequency integrals of |p +- q|^2 / 2 pi (X: +, Y: -).
The response denominator

    M(omega) = eta(omega) eta*(-omega) - (beta n)^2
             = Omega^2(omega) - omega^2 + i Gamma^2(omega)

is sharply peaked near the relaxation sidebands +-Omega, so the exact
integrals need targeted panel refinement there; in the adiabatic regime
(environment fast compared to the cavity) the two peaks integrate to the
closed form implemented in ``variance_adiabatic``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .kernels import FanoMirror, SystemParams, WithBackground
from .steadystate import Drive, pump_for_n


class UnstablePointError(Exception):
    """The working point has no stable steady state to linearize about."""


class NoiseDivergenceError(Exception):
    """noise diverges: instability boundary."""


class SingularResponseError(Exception):
    """singular response: |M(omega)| = 0 at the requested frequency."""


@dataclass(frozen=True)
class LinearizedPoint:
    """A steady state prepared for fluctuation analysis.

    Carries the detuning parameter Delta = omega_ap + 2 beta n and the
    relaxation sideband frequency Omega = sqrt(Delta^2 - (beta n)^2); an
    imaginary Omega marks the conventional (fold) unstable band.
    """

    system: SystemParams
    omega_p: float
    flux: float
    n: float

    @classmethod
    def from_photon_number(cls, system: SystemParams, omega_p: float, n: float):
        return cls(system=system, omega_p=omega_p, flux=pump_for_n(system, omega_p, n), n=n)

    @classmethod
    def from_drive(cls, system: SystemParams, drive: Drive, n: float):
        return cls(system=system, omega_p=drive.omega_p, flux=drive.flux, n=n)

    @property
    def omega_ap(self):
        return self.system.omega_a - self.omega_p

    @property
    def beta_n(self):
        return self.system.beta * self.n

    @property
    def delta(self):
        """Detuning parameter omega_ap + Im K_l(omega_p) + 2 beta n.

        The reactive kernel shift at the pump is kept so the fold-band test
        Delta^2 < (beta n)^2 stays consistent with the steady-state cubic
        for strongly dispersive kernels; for kernels whose shift is small
        against the detuning this reduces to omega_ap + 2 beta n.
        """
        shift = float(np.imag(self.system.kernel.loss(self.omega_p)))
        return self.omega_ap + shift + 2.0 * self.beta_n

    @property
    def omega_sq(self):
        return self.delta**2 - self.beta_n**2

    @property
    def in_saddle_band(self):
        return self.omega_sq < 0.0

    @property
    def omega_relax(self):
        """Real relaxation frequency; raises inside the saddle band."""
        if self.in_saddle_band:
            raise UnstablePointError(
                "unstable point: Delta^2 < (beta n)^2, no stable branch here"
            )
        return math.sqrt(self.omega_sq)

    def drive(self):
        return Drive(omega_p=self.omega_p, flux=self.flux)


@dataclass(frozen=True)
class NoiseResult:
    var_x: float
    var_y: float
    fano: float
    method: str
    gamma_sq: float | None = None


class FluctuationKernel:
    """Frequency-dependent pieces of the linearized response at one point."""

    def __init__(self, point: LinearizedPoint):
        self.point = point
        self._kernel = point.system.kernel

    def kappa_pm(self, omega):
        """Re K_l at omega_p + omega and omega_p - omega."""
        kp = np.real(self._kernel.loss(self.point.omega_p + np.asarray(omega, float)))
        km = np.real(self._kernel.loss(self.point.omega_p - np.asarray(omega, float)))
        return kp, km

    def delta_pm(self, omega):
        """Im K_l at omega_p + omega and omega_p - omega."""
        dp = np.imag(self._kernel.loss(self.point.omega_p + np.asarray(omega, float)))
        dm = np.imag(self._kernel.loss(self.point.omega_p - np.asarray(omega, float)))
        return dp, dm

    def eta(self, omega):
        p = self.point
        omega = np.asarray(omega, dtype=float)
        return 1j * (p.omega_ap - omega + 2.0 * p.beta_n) + np.asarray(
            self._kernel.loss(p.omega_p + omega)
        )

    def M(self, omega):
        return self.eta(omega) * np.conj(self.eta(-np.asarray(omega, float))) - self.point.beta_n**2

    def omega_sq_of(self, omega):
        """Re M + omega^2: the frequency-dependent squared sideband resonance."""
        p = self.point
        omega = np.asarray(omega, dtype=float)
        kp, km = self.kappa_pm(omega)
        dp, dm = self.delta_pm(omega)
        b = p.beta_n
        return (
            3.0 * b**2
            + (p.omega_ap + dm) * (p.omega_ap + dp)
            + 2.0 * b * (2.0 * p.omega_ap + dp + dm)
            + (dp - dm) * omega
            + kp * km
        )

    def gamma_sq_of(self, omega):
        """Im M: signed damping of the sideband response (negative = damped)."""
        p = self.point
        omega = np.asarray(omega, dtype=float)
        kp, km = self.kappa_pm(omega)
        dp, dm = self.delta_pm(omega)
        b = p.beta_n
        return (
            2.0 * b * (km - kp)
            + km * (p.omega_ap + dp - omega)
            - kp * (p.omega_ap + dm + omega)
        )

    def sideband_roots(self, w_max):
        """Real omega > 0 where Omega^2(omega) = omega^2 (response peaks)."""
        def g(w):
            return float(self.omega_sq_of(w) - w**2)

        grid = np.linspace(0.0, w_max, 4001)
        vals = self.omega_sq_of(grid) - grid**2
        roots = []
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if fa == 0.0:
                roots.append(float(a))
            elif fa * fb < 0:
                roots.append(float(optimize.brentq(g, a, b, xtol=1e-14 * max(w_max, 1.0))))
        return sorted(set(roots))


def transfer_pq(point: LinearizedPoint, omega):
    """Transfer functions (p, q) of the fluctuations onto the vacuum input."""
    fk = FluctuationKernel(point)
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    m = fk.M(omega)
    scale = max(point.system.kernel.rate_scale, abs(point.delta), point.beta_n, 1e-300)
    if np.any(np.abs(m) <= 1e-30 * scale**2):
        raise SingularResponseError("singular response: M(omega) = 0 on the grid")
    kc = np.asarray(point.system.kernel.coupling(point.omega_p + omega))
    p = np.conj(fk.eta(-omega)) * kc / m
    q = 1j * point.beta_n * kc / m
    if scalar:
        return complex(p[()]), complex(q[()])
    return p, q


def _check_linearizable(point: LinearizedPoint):
    if point.in_saddle_band:
        raise UnstablePointError(
            "unstable point: Delta^2 < (beta n)^2 (fold band), no steady state to "
            "linearize about"
        )


def _divergence_guard(point: LinearizedPoint, fk: FluctuationKernel, w_max: float):
    """Raise when a response pole sits on (or above) the real axis.

    The peaks live where Omega^2(omega) = omega^2; their damping is the sign
    of Gamma^2 there (negative means decay).  Gamma^2 >= 0 at a peak puts the
    pole on the real axis and the variance integral diverges, which is the
    modulational-instability boundary.
    """
    roots = fk.sideband_roots(w_max)
    scale = max(point.system.kernel.rate_scale, 1e-300) * max(abs(point.delta), 1e-300)
    for w in roots:
        if w <= 0:
            continue
        g2 = float(fk.gamma_sq_of(w))
        if g2 >= -1e-12 * scale:
            raise NoiseDivergenceError(
                "noise diverges: instability boundary (undamped sideband at "
                "omega = %g)" % w
            )
    return roots


def _integration_window(point: LinearizedPoint, roots):
    kernel = point.system.kernel
    loss_p = abs(complex(kernel.loss(point.omega_p)).real)
    bandwidth = kernel.feature_width if math.isfinite(kernel.feature_width) else loss_p
    w_peaks = max((abs(r) for r in roots), default=0.0)
    w = max(
        10.0 * w_peaks,
        100.0 * max(loss_p, kernel.rate_scale),
        10.0 * bandwidth,
        4.0 * abs(point.delta) + 4.0 * point.beta_n,
    )
    if isinstance(kernel, FanoMirror) or (
        isinstance(kernel, WithBackground) and isinstance(kernel.inner, FanoMirror)
    ):
        fano = kernel if isinstance(kernel, FanoMirror) else kernel.inner
        w = max(w, 4.0 * fano.free_spectral_range)
    return w


def _feature_points(point: LinearizedPoint, fk: FluctuationKernel, roots, lo, hi):
    """Panel split points: response peaks with graded halos, kernel features."""
    pts = set()
    for r in roots:
        for s in (+1.0, -1.0):
            w = s * r
            g2 = abs(float(fk.gamma_sq_of(w)))
            width = g2 / (2.0 * abs(w)) if w != 0 else g2
            width = max(width, 1e-12 * max(abs(w), 1.0))
            for m in (1.0, 10.0, 100.0):
                pts.add(w - m * width)
                pts.add(w + m * width)
            pts.add(w)
    kernel = point.system.kernel
    for w0 in kernel.feature_frequencies(point.omega_p + lo, point.omega_p + hi):
        pts.add(w0 - point.omega_p)          # feature seen by K(omega_p + omega)
    for w0 in kernel.feature_frequencies(point.omega_p - hi, point.omega_p - lo):
        pts.add(point.omega_p - w0)          # feature seen by K(omega_p - omega)
    pts.add(0.0)
    return sorted(p for p in pts if lo < p < hi)


def _integrate_line(f, lo, hi, pts, abs_tol, max_doublings=40):
    total = 0.0
    cuts = [lo] + pts + [hi]
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        val, _ = integrate.quad(f, a, b, limit=400, epsabs=abs_tol / 10.0, epsrel=1e-9)
        total += val
    # extend the tails in octaves until they stop mattering
    for side in (-1, +1):
        edge = hi if side > 0 else -lo
        for _ in range(max_doublings):
            a, b = (edge, 2.0 * edge) if side > 0 else (-2.0 * edge, -edge)
            val, _ = integrate.quad(f, a, b, limit=400, epsabs=abs_tol / 10.0, epsrel=1e-7)
            total += val
            edge *= 2.0
            if abs(val) < 0.25 * abs_tol:
                break
        else:
            raise NoiseDivergenceError("variance tail integral failed to converge")
    return total


def quadrature_variance(point: LinearizedPoint, sigma: int, abs_tol: float = 1e-6) -> float:
    """Exact variance of one quadrature (sigma=+1: X, -1: Y) by quadrature."""
    if sigma not in (+1, -1):
        raise ValueError("sigma must be +1 (X) or -1 (Y)")
    _check_linearizable(point)
    fk = FluctuationKernel(point)
    kernel = point.system.kernel
    w_probe = max(
        4.0 * (abs(point.delta) + point.beta_n),
        10.0 * kernel.rate_scale,
        1e-6 * point.system.omega_a,
    )
    roots = _divergence_guard(point, fk, w_probe)
    w_max = _integration_window(point, roots)
    pts = _feature_points(point, fk, roots, -w_max, w_max)

    def integrand(w):
        p, q = transfer_pq(point, w)
        amp = p + q if sigma > 0 else p - q
        return abs(amp) ** 2 / (2.0 * math.pi)

    return _integrate_line(integrand, -w_max, w_max, pts, abs_tol)


def variance_exact(point: LinearizedPoint, abs_tol: float = 1e-6) -> NoiseResult:
    """Both quadrature variances from the exact frequency integrals."""
    vx = quadrature_variance(point, +1, abs_tol=abs_tol)
    vy = quadrature_variance(point, -1, abs_tol=abs_tol)
    return NoiseResult(var_x=vx, var_y=vy, fano=vx, method="exact")


def _adiabatic_pieces(point: LinearizedPoint):
    _check_linearizable(point)
    omega_r = point.omega_relax
    kernel = point.system.kernel
    kp = float(np.real(kernel.loss(point.omega_p + omega_r)))
    km = float(np.real(kernel.loss(point.omega_p - omega_r)))
    if kp + km <= 0:
        raise UnstablePointError("lossless sidebands: adiabatic form undefined")
    r = (kp - km) / (kp + km)
    return omega_r, kp, km, r


def variance_adiabatic(point: LinearizedPoint) -> NoiseResult:
    """Closed-form variances from the two-Lorentzian peak approximation.

    var_x = (Delta - beta n)(Delta + r Omega) / (Omega (Omega + r Delta)) with
    r the loss asymmetry (kappa+ - kappa-)/(kappa+ + kappa-) probed at the
    sidebands omega_p +- Omega; var_y carries (Delta + beta n) instead.  The
    denominator zero 1 + r Delta/Omega = 0 is the modulational-instability
    boundary and raises.
    """
    omega_r, kp, km, r = _adiabatic_pieces(point)
    d, b = point.delta, point.beta_n
    kernel = point.system.kernel
    if math.isfinite(kernel.feature_width):
        loss_p = abs(complex(kernel.loss(point.omega_p)).real)
        if kernel.feature_width < 10.0 * loss_p:
            warnings.warn(
                "environment bandwidth below 10x the cavity linewidth; the "
                "adiabatic approximation may be inaccurate",
                stacklevel=2,
            )
    if omega_r == 0.0:
        raise UnstablePointError("on the fold boundary: Omega = 0")
    denom = omega_r + r * d
    if denom <= 0.0 or (1.0 + r * d / omega_r) <= 0.0:
        raise NoiseDivergenceError(
            "adiabatic MI criterion violated: 1 + r Delta/Omega <= 0"
        )
    core = (d + r * omega_r) / (omega_r * denom)
    vx = (d - b) * core
    vy = (d + b) * core
    gamma_sq = abs(d * (km - kp) - omega_r * (km + kp))
    return NoiseResult(var_x=vx, var_y=vy, fano=vx, method="adiabatic", gamma_sq=gamma_sq)


def sharp_loss_slope(system: SystemParams, omega_p: float, rel_tol: float = 1e-8) -> float:
    """Logarithmic slope (d Re K_l / d omega) / Re K_l at the pump.

    This is the Omega -> 0 limit of r / Omega and bounds the attainable
    intensity squeezing at a fold edge.  Centered differences with stepwise
    Richardson refinement; the step starts at a fraction of the local
    feature width.
    """
    kernel = system.kernel
    loss_p = float(np.real(kernel.loss(omega_p)))
    if loss_p <= 0:
        raise ValueError("zero loss point: Re K_l(omega_p) must be positive")

    width = kernel.feature_width if math.isfinite(kernel.feature_width) else omega_p
    feats = kernel.feature_frequencies(omega_p - 10 * width, omega_p + 10 * width)
    gap = min((abs(omega_p - f) for f in feats), default=width)
    h = 0.25 * max(min(width, gap), 1e-12 * omega_p)

    def diff(step):
        kp = float(np.real(kernel.loss(omega_p + step)))
        km = float(np.real(kernel.loss(omega_p - step)))
        return (kp - km) / (2.0 * step)

    prev = diff(h)
    for _ in range(40):
        h *= 0.5
        if h < 1e-13 * max(omega_p, 1.0):
            break
        cur = diff(h)
        better = (4.0 * cur - prev) / 3.0
        if abs(better - cur) <= rel_tol * max(abs(better), 1e-300):
            return better / loss_p
        prev = cur
    return prev / loss_p


def noise_spectrum(point: LinearizedPoint, omega_grid):
    """Tabulated spectral densities |p+q|^2 and |p-q|^2 on the grid.

    Integrating either over omega / 2 pi reproduces the corresponding exact
    variance (for a grid wide and fine enough).
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    p, q = transfer_pq(point, omega_grid)
    sx = np.abs(p + q) ** 2
    sy = np.abs(p - q) ** 2
    return sx, sy
