"""Frequency-dependent loss and coupling kernels for a driven nonlinear resonance.

A resonance with frequency-dependent environment coupling is described by a
pair of frequency-domain kernels: a complex loss kernel K_l(omega) whose real
part is the damping rate and whose imaginary part is the reactive frequency
shift, and a coupling kernel K_c(omega) that feeds the external input field
into the mode.  For any causal, energy-conserving coupling the two are tied
together by |K_c(omega)|^2 = 2 Re K_l(omega).

Three kernel families are provided:

* ``Markovian``          flat loss gamma, flat coupling sqrt(2 gamma)
* ``FriedrichWintgen``   two resonances sharing one continuum; the loss of the
                         driven mode vanishes at the dark-mode frequency
* ``FanoMirror``         cavity closed by a partially transmitting resonant
                         mirror; loss is periodic with the round-trip time

``WithBackground`` wraps any of them and adds a flat non-radiative loss that
deliberately breaks the coupling identity (the extra channel sees vacuum but
carries no coherent input).

All rates and frequencies must be supplied in one consistent unit system;
``load_system`` normalizes everything by the bare resonance frequency when
given absolute units.
"""

from __future__ import annotations

import cmath
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

SPEED_OF_LIGHT = 299792458.0


class KernelConsistencyError(Exception):
    """A kernel failed a physical consistency check (causality, KK identity)."""


class SumRuleConvergenceError(Exception):
    """Adaptive tail extension of the response sum rule did not converge."""


def _as_float_array(omega):
    arr = np.asarray(omega, dtype=float)
    return arr, arr.ndim == 0


def _maybe_scalar(values, scalar):
    return complex(values[()]) if scalar else values


@dataclass(frozen=True)
class Markovian:
    """Flat (memoryless) loss: K_l = gamma, K_c = sqrt(2 gamma)."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    def loss(self, omega):
        omega, scalar = _as_float_array(omega)
        out = np.full(omega.shape, self.gamma, dtype=complex)
        return _maybe_scalar(out, scalar)

    def coupling(self, omega):
        omega, scalar = _as_float_array(omega)
        out = np.full(omega.shape, math.sqrt(2.0 * self.gamma), dtype=complex)
        return _maybe_scalar(out, scalar)

    @property
    def rate_scale(self):
        return self.gamma

    @property
    def dt_max(self):
        return math.inf

    @property
    def memory_time(self):
        return 0.0

    @property
    def center_frequency(self):
        return 0.0

    @property
    def is_periodic(self):
        return False

    def feature_frequencies(self, lo, hi):
        return []

    @property
    def feature_width(self):
        return math.inf


@dataclass(frozen=True)
class FriedrichWintgen:
    """Two modes decaying into one continuum.

    kappa and gamma are the decay rates of the driven mode and the auxiliary
    mode at omega_d.  Interference makes Re K_l vanish exactly at omega_d.
    """

    kappa: float
    gamma: float
    omega_d: float

    def __post_init__(self):
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("rates must be nonnegative")

    def _bracket(self, omega):
        # 1 - gamma / (i (omega_d - omega) + gamma)
        detuning = self.omega_d - omega
        return 1.0 - self.gamma / (1j * detuning + self.gamma)

    def loss(self, omega):
        omega, scalar = _as_float_array(omega)
        out = self.kappa * self._bracket(omega)
        return _maybe_scalar(np.asarray(out, dtype=complex), scalar)

    def coupling(self, omega):
        omega, scalar = _as_float_array(omega)
        out = math.sqrt(2.0 * self.kappa) * self._bracket(omega)
        return _maybe_scalar(np.asarray(out, dtype=complex), scalar)

    @property
    def rate_scale(self):
        return max(self.kappa, self.gamma)

    @property
    def dt_max(self):
        return 0.1 / self.gamma if self.gamma > 0 else math.inf

    @property
    def memory_time(self):
        # envelope exp(-gamma tau) below 1e-8 of its peak
        return 18.5 / self.gamma if self.gamma > 0 else 0.0

    @property
    def center_frequency(self):
        return self.omega_d

    @property
    def is_periodic(self):
        return False

    def feature_frequencies(self, lo, hi):
        return [w for w in (self.omega_d,) if lo < w < hi]

    @property
    def feature_width(self):
        return self.gamma


@dataclass(frozen=True)
class FanoMirror:
    """Cavity terminated by a resonant (Fano) mirror.

    r_d and t_d are the mirror's reflection and transmission amplitudes,
    sigma = +-1 its parity, T the cavity round-trip time.  The loss is
    periodic in omega with period 2 pi / T and vanishes on a comb of
    dark frequencies.  theta2 is pinned to the mirror amplitudes through
    exp(2 i theta2) = r_d - i t_d sigma; theta1 defaults to the value that
    keeps |K_c|^2 = 2 Re K_l (theta2 for sigma=+1, theta2 - pi for
    sigma=-1).
    """

    kappa: float
    r_d: float
    t_d: float
    sigma: int
    T: float
    theta1: float | None = None
    theta2: float | None = None

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.T <= 0:
            raise ValueError("round-trip time T must be positive")
        if self.sigma not in (+1, -1):
            raise ValueError("sigma must be +1 or -1")
        if self.r_d**2 + self.t_d**2 > 1.0 + 1e-12:
            raise ValueError("r_d^2 + t_d^2 must not exceed 1")
        ideal = self.r_d - 1j * self.t_d * self.sigma
        if self.theta2 is None:
            object.__setattr__(self, "theta2", cmath.phase(ideal) / 2.0)
        else:
            if abs(cmath.exp(2j * self.theta2) - ideal) > 1e-9:
                raise ValueError(
                    "theta2 inconsistent: exp(2i theta2) must equal r_d - i t_d sigma"
                )
        if self.theta1 is None:
            shift = 0.0 if self.sigma == +1 else math.pi
            object.__setattr__(self, "theta1", self.theta2 - shift)

    def _denominator(self, omega):
        return self.r_d - np.exp(-1j * omega * self.T)

    def loss(self, omega):
        omega, scalar = _as_float_array(omega)
        numer = self.r_d - 1j * self.t_d * self.sigma
        out = 2.0 * self.kappa * (1.0 - numer / self._denominator(omega))
        return _maybe_scalar(np.asarray(out, dtype=complex), scalar)

    def coupling(self, omega):
        omega, scalar = _as_float_array(omega)
        rel = cmath.exp(1j * (self.theta2 - self.theta1))
        out = (
            math.sqrt(2.0 * self.kappa)
            * cmath.exp(1j * self.theta1)
            * (1.0 + 1j * self.t_d * rel / self._denominator(omega))
        )
        return _maybe_scalar(np.asarray(out, dtype=complex), scalar)

    @property
    def free_spectral_range(self):
        return 2.0 * math.pi / self.T

    @property
    def rate_scale(self):
        return self.kappa

    @property
    def dt_max(self):
        return self.T / 64.0

    @property
    def memory_time(self):
        # echo train r_d^m below 1e-8
        if self.r_d == 0:
            return self.T
        m = math.log(1e-8) / math.log(abs(self.r_d)) if abs(self.r_d) < 1 else 1e9
        return (m + 1.0) * self.T

    @property
    def center_frequency(self):
        return 0.0

    @property
    def is_periodic(self):
        return True

    def feature_frequencies(self, lo, hi):
        """Comb resonances and loss zeros inside (lo, hi)."""
        pts = []
        fsr = self.free_spectral_range
        # near-pole of (r_d - e^{-i omega T}): omega T = 0 mod 2pi for r_d > 0,
        # pi mod 2pi for r_d < 0
        pole_phase = 0.0 if self.r_d >= 0 else math.pi
        # loss zero: cos(omega T -+ phi) = 1 with phi = atan2(t_d sigma, r_d)
        zero_phase = -cmath.phase(self.r_d - 1j * self.t_d * self.sigma)
        for phase in (pole_phase, zero_phase):
            k0 = math.floor((lo * self.T - phase) / (2.0 * math.pi))
            k1 = math.ceil((hi * self.T - phase) / (2.0 * math.pi))
            for k in range(int(k0), int(k1) + 1):
                w = (phase + 2.0 * math.pi * k) / self.T
                if lo < w < hi:
                    pts.append(w)
        return sorted(pts)

    @property
    def feature_width(self):
        return max(1.0 - abs(self.r_d), 1e-12) / self.T


@dataclass(frozen=True)
class WithBackground:
    """Adds a flat non-radiative loss kappa_bg to Re K_l; K_c is untouched."""

    inner: Markovian | FriedrichWintgen | FanoMirror
    kappa_bg: float

    def __post_init__(self):
        if self.kappa_bg < 0:
            raise ValueError("kappa_bg must be nonnegative")
        if isinstance(self.inner, WithBackground):
            raise ValueError("nest a single background channel only")

    def loss(self, omega):
        out = self.inner.loss(omega)
        return out + self.kappa_bg

    def coupling(self, omega):
        return self.inner.coupling(omega)

    @property
    def rate_scale(self):
        return max(self.inner.rate_scale, self.kappa_bg)

    @property
    def dt_max(self):
        return self.inner.dt_max

    @property
    def memory_time(self):
        return self.inner.memory_time

    @property
    def center_frequency(self):
        return self.inner.center_frequency

    @property
    def is_periodic(self):
        return self.inner.is_periodic

    def feature_frequencies(self, lo, hi):
        return self.inner.feature_frequencies(lo, hi)

    @property
    def feature_width(self):
        return self.inner.feature_width


KernelModel = Markovian | FriedrichWintgen | FanoMirror | WithBackground


@dataclass(frozen=True)
class SystemParams:
    """Bare resonance frequency, Kerr shift per photon, and the environment."""

    omega_a: float
    beta: float
    kernel: KernelModel

    def __post_init__(self):
        if self.omega_a <= 0:
            raise ValueError("omega_a must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative (0 = linear cavity)")


@dataclass(frozen=True)
class ComplexKernelSample:
    omega: float
    K_l: complex
    K_c: complex


def loss_at(model: KernelModel, omega):
    """K_l(omega); complex, vectorized over omega."""
    return model.loss(omega)


def coupling_at(model: KernelModel, omega):
    """K_c(omega); complex, vectorized over omega."""
    return model.coupling(omega)


def kernel_scan(model: KernelModel, omegas) -> list[ComplexKernelSample]:
    kl = np.atleast_1d(model.loss(omegas))
    kc = np.atleast_1d(model.coupling(omegas))
    om = np.atleast_1d(np.asarray(omegas, dtype=float))
    return [ComplexKernelSample(float(w), complex(l), complex(c)) for w, l, c in zip(om, kl, kc)]


def kk_residual(model: KernelModel, grid) -> float:
    """Worst-case | 2 Re K_l - |K_c|^2 | over the grid.

    Background loss breaks the identity by construction (2 kappa_bg offset),
    so wrapped models are rejected instead of reporting a misleading number.
    """
    if isinstance(model, WithBackground):
        raise ValueError(
            "kk_residual: background loss violates |K_c|^2 = 2 Re K_l by "
            "2*kappa_bg; validate the inner model instead"
        )
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("kk_residual: empty frequency grid")
    kl = np.atleast_1d(model.loss(grid))
    kc = np.atleast_1d(model.coupling(grid))
    return float(np.max(np.abs(2.0 * kl.real - np.abs(kc) ** 2)))


def response_xi(system: SystemParams, omega):
    """Linear response xi(omega) of the lossy mode, Kerr term ignored.

    xi = 1 / (omega_a + Im K_l - omega - i Re K_l); the sign is fixed so that
    Im xi >= 0 wherever Re K_l > 0 and the integral of Im xi over all
    frequencies equals pi.
    """
    omega, scalar = _as_float_array(omega)
    kl = np.atleast_1d(system.kernel.loss(omega))
    out = 1.0 / (system.omega_a + kl.imag - omega - 1j * kl.real)
    return _maybe_scalar(out.reshape(omega.shape) if omega.ndim else out, scalar)


def _panel_quad(f, a, b, points, limit=200):
    """Integrate f over [a, b], splitting at interior points."""
    cuts = [a] + sorted(p for p in points if a < p < b) + [b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        val, _ = integrate.quad(f, lo, hi, limit=limit)
        total += val
    return total


def sum_rule_check(
    system: SystemParams,
    rel_tol: float = 1e-4,
    initial_halfwidth: float | None = None,
    max_doublings: int = 48,
) -> float:
    """Integral of Im xi / pi over all frequencies; 1 for a consistent kernel.

    The integrand is a generalized Lorentzian around the (shifted) resonance.
    A central window is integrated with panel splits at the kernel's feature
    frequencies, then extended in doubling octaves until each octave
    contributes less than rel_tol/4 of the accumulated total.
    """
    kernel = system.kernel
    wa = system.omega_a

    def f(w):
        return np.imag(response_xi(system, w)) / math.pi

    linewidth = max(abs(complex(kernel.loss(wa)).real), 1e-6 * wa)
    if initial_halfwidth is None:
        span = abs(kernel.center_frequency - wa) if kernel.center_frequency else 0.0
        width = kernel.feature_width if math.isfinite(kernel.feature_width) else linewidth
        initial_halfwidth = max(50.0 * linewidth, 2.0 * span + 20.0 * width, 0.5 * wa)
        if isinstance(kernel, FanoMirror):
            initial_halfwidth = max(initial_halfwidth, 25.0 * kernel.free_spectral_range)

    lo, hi = wa - initial_halfwidth, wa + initial_halfwidth
    pts = [wa, wa - linewidth, wa + linewidth] + kernel.feature_frequencies(lo, hi)
    total = _panel_quad(f, lo, hi, pts)

    for side in (-1, +1):
        w_edge = initial_halfwidth
        for _ in range(max_doublings):
            if side < 0:
                a, b = wa - 2.0 * w_edge, wa - w_edge
            else:
                a, b = wa + w_edge, wa + 2.0 * w_edge
            contrib = _panel_quad(f, a, b, kernel.feature_frequencies(a, b))
            total += contrib
            w_edge *= 2.0
            if abs(contrib) < 0.25 * rel_tol * max(abs(total), 1e-3):
                break
        else:
            raise SumRuleConvergenceError(
                "sum rule tail did not converge after %d doublings" % max_doublings
            )
    return float(total)


@dataclass(frozen=True)
class TimeKernel:
    tau: np.ndarray
    K_l: np.ndarray
    K_c: np.ndarray
    dt: float
    negative_energy_fraction: float


def _sampled_transform(values, n, dt, oversample, center):
    """Inverse transform of frequency samples onto the tau grid of spacing dt.

    The flat (asymptotic) part of the kernel is removed before transforming
    and returned to the tau = 0 bin as a discrete delta of weight flat / dt.
    The deviation is sampled on an ``oversample``-times wider bandwidth and
    subsampled back, which suppresses the wrap-around ringing of slowly
    decaying 1/omega tails by ~oversample^2.
    """
    flat = 0.5 * (values(-math.pi / (dt / oversample)) + values(math.pi / (dt / oversample)))
    dt_f = dt / oversample
    n_f = n * oversample
    nu = 2.0 * math.pi * np.fft.fftfreq(n_f, d=dt_f)
    dev = np.atleast_1d(values(nu)) - flat
    j = np.arange(n_f)
    tau_f = np.where(j < n_f - n_f // 2, j, j - n_f) * dt_f
    phase = np.exp(-1j * center * tau_f)
    k_t = np.fft.fft(dev) / (n_f * dt_f) * phase
    # subsample onto the coarse grid; fine index 0 is tau = 0
    coarse = (j % oversample) == 0
    tau = tau_f[coarse]
    k_t = k_t[coarse].copy()
    k_t[0] += flat / dt
    order = np.argsort(tau, kind="stable")
    return tau[order], k_t[order]


def time_kernel(
    model: KernelModel,
    dt: float,
    n_samples: int,
    center: float | None = None,
    causality_tol: float = 1e-6,
    oversample: int = 16,
    check: bool = True,
) -> TimeKernel:
    """Sampled time-domain kernels K(tau) = (1/2pi) Int e^{-i omega tau} K(omega) domega.

    The frequency kernel is sampled around ``center`` (the kernel's own
    feature center by default) and Fourier transformed; instantaneous (flat)
    parts land exactly in the tau = 0 bin with weight flat / dt.  The
    fraction of kernel energy at tau < 0 measures causality violation and
    raises above tolerance.
    """
    if dt <= 0 or n_samples < 8:
        raise ValueError("need dt > 0 and at least 8 samples")
    if dt > model.dt_max:
        raise ValueError(
            "dt = %g does not resolve the kernel bandwidth; need dt <= %g"
            % (dt, model.dt_max)
        )
    if center is None:
        center = model.center_frequency
    n = int(n_samples)
    # a periodic kernel is an impulse train; the commensurate-window DFT is
    # already exact and widening the band would misweight the impulses
    if model.is_periodic:
        oversample = 1

    tau, kl_t = _sampled_transform(lambda nu: model.loss(center + nu), n, dt, oversample, center)
    _, kc_t = _sampled_transform(lambda nu: model.coupling(center + nu), n, dt, oversample, center)

    neg = tau < 0
    frac = 0.0
    for k in (kl_t, kc_t):
        e_tot = float(np.sum(np.abs(k) ** 2))
        if e_tot > 0:
            frac = max(frac, float(np.sum(np.abs(k[neg]) ** 2)) / e_tot)
    if check and frac >= causality_tol:
        raise KernelConsistencyError(
            "time kernel is acausal: negative-time energy fraction %.3g "
            "(inconsistent model parameters?)" % frac
        )
    return TimeKernel(tau=tau, K_l=kl_t, K_c=kc_t, dt=dt, negative_energy_fraction=frac)


# ---------------------------------------------------------------------------
# model / system ingestion


_MODEL_KEYS = {
    "markov": {"gamma"},
    "fw": {"kappa", "gamma", "omega_d"},
    "fano": {"kappa", "r_d", "t_d", "sigma", "T", "L", "theta1", "theta2"},
}


def model_from_dict(spec: dict, scale: float = 1.0) -> KernelModel:
    """Build a kernel from a plain dict; rates divided, times multiplied by scale."""
    name = spec.get("model")
    if name not in _MODEL_KEYS:
        raise ValueError("unknown model %r; expected one of markov, fw, fano" % name)
    if name == "markov":
        model = Markovian(gamma=spec["gamma"] / scale)
    elif name == "fw":
        model = FriedrichWintgen(
            kappa=spec["kappa"] / scale,
            gamma=spec["gamma"] / scale,
            omega_d=spec["omega_d"] / scale,
        )
    else:
        if "T" in spec:
            T = spec["T"] * scale
        elif "L" in spec:
            T = 2.0 * spec["L"] / SPEED_OF_LIGHT * scale
        else:
            raise ValueError("fano model needs a round-trip time T or a length L")
        model = FanoMirror(
            kappa=spec["kappa"] / scale,
            r_d=spec["r_d"],
            t_d=spec["t_d"],
            sigma=int(spec.get("sigma", +1)),
            T=T,
            theta1=spec.get("theta1"),
            theta2=spec.get("theta2"),
        )
    bg = spec.get("background", 0.0)
    if bg:
        model = WithBackground(inner=model, kappa_bg=bg / scale)
    return model


def load_system(source) -> tuple[SystemParams, float]:
    """Read a system from a JSON document (path, str, or dict).

    Returns (system, unit_scale).  With ``"units": "absolute"`` every rate
    and frequency is divided by omega_a internally and unit_scale is set to
    omega_a so outputs can be converted back; with ``"normalized"`` values
    are taken as given (omega_a defaults to 1) and unit_scale is 1.
    """
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        spec = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        spec = json.loads(source)
    else:
        spec = dict(source)

    units = spec.get("units", "normalized")
    if units not in ("absolute", "normalized"):
        raise ValueError("units must be 'absolute' or 'normalized'")
    omega_a = spec.get("omega_a", 1.0 if units == "normalized" else None)
    if omega_a is None:
        raise ValueError("absolute units require omega_a")
    scale = omega_a if units == "absolute" else 1.0
    model = model_from_dict(spec, scale=scale)
    system = SystemParams(
        omega_a=omega_a / scale,
        beta=spec.get("beta", 0.0) / scale,
        kernel=model,
    )
    return system, scale
