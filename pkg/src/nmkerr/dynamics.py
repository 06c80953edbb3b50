"""Time-domain mean-field dynamics in the pump rotating frame.

Two integrators cover the classical equation of motion.  For the two-mode
interference kernel the auxiliary mode is kept explicitly and the coupled
ODEs are stepped with fixed-step RK4; this is exact (no memory truncation)
and serves as the oracle for the general path.  For any kernel the
single-mode equation with a memory convolution is integrated split-step:
the Kerr + detuning phase advances exactly over half steps, and the memory
and drive convolutions advance with a semi-implicit trapezoid rule.  History
older than the current block is folded in with FFT convolutions
(overlap-save), so the cost stays O(N log N) for N steps.

Working in the frame rotating at the pump makes the steady state a fixed
point; a relative seed perturbation on alpha(0) gives reproducible
modulational-instability growth without stochastic forcing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sp_signal

from .kernels import FriedrichWintgen, SystemParams, WithBackground, time_kernel
from .steadystate import Drive, steady_roots


class StepSizeError(ValueError):
    """dt too coarse for the fastest rate in the problem."""


class BlowUpError(RuntimeError):
    """blow-up: reduce dt or flux."""


class WindowTooShortError(ValueError):
    """Analysis window holds too few oscillation periods."""


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    alpha: np.ndarray
    drive: Drive
    dt: float
    method: str
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return np.abs(self.alpha) ** 2


@dataclass(frozen=True)
class PulsingDiagnostics:
    is_pulsing: bool
    dominant_freq: float | None
    swing_fraction: float
    decay_rate: float | None


def _expected_photon_number(system: SystemParams, drive: Drive) -> float:
    try:
        roots = steady_roots(system, drive)
        return max(r.n for r in roots)
    except Exception:
        return 0.0


def _decimation_stride(n_points, max_samples):
    return 1 if n_points <= max_samples else int(math.ceil(n_points / max_samples))


def simulate_two_mode(
    system: SystemParams,
    drive: Drive,
    t_end: float,
    dt: float | None = None,
    initial: tuple[complex, complex] = (0j, 0j),
    max_samples: int = 1_000_000,
) -> Trajectory:
    """RK4 integration of the coupled (alpha, d) equations for the
    two-mode interference kernel; mode d is kept internal.

    Requires dt * max(gamma, |omega_ap|, beta*n_expected) <= 0.05.
    """
    kernel = system.kernel
    bg = 0.0
    if isinstance(kernel, WithBackground):
        bg = kernel.kappa_bg
        kernel = kernel.inner
    if not isinstance(kernel, FriedrichWintgen):
        raise ValueError("simulate_two_mode needs a FriedrichWintgen kernel")

    omega_ap = system.omega_a - drive.omega_p
    omega_dp = kernel.omega_d - drive.omega_p
    n_exp = _expected_photon_number(system, drive)
    rate = max(kernel.gamma, abs(omega_ap), system.beta * n_exp)
    rate_full = max(rate, kernel.kappa + bg, abs(omega_dp))
    if dt is None:
        dt = 0.02 / rate_full if rate_full > 0 else t_end / 1000.0
    if rate > 0 and dt * rate > 0.05:
        raise StepSizeError(
            "dt = %g too coarse: dt * max(gamma, |omega_ap|, beta n) = %.3g > 0.05; "
            "try dt <= %g" % (dt, dt * rate, 0.05 / rate)
        )

    n_steps = int(math.ceil(t_end / dt))
    kappa_t = kernel.kappa + bg
    gamma = kernel.gamma
    cross = math.sqrt(kernel.kappa * kernel.gamma)
    beta = system.beta
    s0 = math.sqrt(drive.flux)
    ca = -(1j * omega_ap + kappa_t)
    cd = -(1j * omega_dp + gamma)
    drv_a = math.sqrt(2.0 * kernel.kappa) * s0
    drv_d = math.sqrt(2.0 * gamma) * s0

    def deriv(a, d):
        da = ca * a - 1j * beta * (a.real**2 + a.imag**2) * a - cross * d + drv_a
        dd = cd * d - cross * a + drv_d
        return da, dd

    a, d = complex(initial[0]), complex(initial[1])
    alphas = np.empty(n_steps + 1, dtype=complex)
    d_hist = np.empty(n_steps + 1, dtype=complex)
    alphas[0] = a
    d_hist[0] = d
    half = dt / 2.0
    sixth = dt / 6.0
    for k in range(n_steps):
        k1a, k1d = deriv(a, d)
        k2a, k2d = deriv(a + half * k1a, d + half * k1d)
        k3a, k3d = deriv(a + half * k2a, d + half * k2d)
        k4a, k4d = deriv(a + dt * k3a, d + dt * k3d)
        a = a + sixth * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        d = d + sixth * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        alphas[k + 1] = a
        d_hist[k + 1] = d
        if not (math.isfinite(a.real) and math.isfinite(a.imag)):
            raise BlowUpError("blow-up at t = %g: reduce dt or flux" % ((k + 1) * dt))
    t = np.arange(n_steps + 1) * dt
    stride = _decimation_stride(t.size, max_samples)
    meta = {"n_steps": n_steps, "aux_mode": d_hist[::stride], "stride": stride}
    return Trajectory(
        t=t[::stride], alpha=alphas[::stride], drive=drive, dt=dt, method="two-mode", meta=meta
    )


def _causal_kernel_samples(system: SystemParams, omega_p: float, dt: float):
    """Rotating-frame kernel samples on the step grid, causal part only."""
    kernel = system.kernel
    mem = kernel.memory_time
    h_need = max(int(math.ceil(mem / dt)) + 2, 4)
    n_fft = 1 << max(int(math.ceil(math.log2(2 * h_need))), 10)
    tk = time_kernel(kernel, dt, n_fft, check=False)
    causal = tk.tau >= 0
    tau = tk.tau[causal]
    rot = np.exp(1j * omega_p * tau)
    kl = tk.K_l[causal] * rot
    kc = tk.K_c[causal] * rot
    # truncate once the envelope falls below 1e-8 of the peak
    mag = np.maximum(np.abs(kl), np.abs(kc))
    peak = float(mag.max())
    keep = np.nonzero(mag > 1e-8 * peak)[0]
    h_len = int(keep[-1]) + 1 if keep.size else 1
    h_len = max(h_len, 1)
    return kl[:h_len], kc[:h_len]


def simulate_split_step(
    system: SystemParams,
    drive: Drive,
    t_end: float,
    dt: float | None = None,
    initial: complex = 0j,
    block: int = 128,
    max_samples: int = 1_000_000,
) -> Trajectory:
    """Split-step integration of the single-mode memory equation.

    Per step: half an exact Kerr + detuning rotation, a trapezoid update of
    the memory convolution and drive in-coupling, and the second rotation
    half.  The drive term is the convolution of the coupling kernel with the
    switched-on pump, so turn-on transients match the explicit two-mode
    realization of the kernel.
    """
    kernel = system.kernel
    n_exp = _expected_photon_number(system, drive)
    if dt is None:
        rate = max(
            1.0 / kernel.dt_max if math.isfinite(kernel.dt_max) else 0.0,
            system.beta * n_exp / 0.05,
            abs(system.omega_a - drive.omega_p),
            kernel.rate_scale,
        )
        dt = 0.02 / rate if rate > 0 else t_end / 1000.0
    if dt > kernel.dt_max:
        raise StepSizeError(
            "dt = %g does not resolve the kernel bandwidth; need dt <= %g"
            % (dt, kernel.dt_max)
        )
    if system.beta * n_exp * dt > 0.05:
        raise StepSizeError(
            "dt = %g too coarse for the Kerr rotation: dt * beta * n = %.3g > 0.05"
            % (dt, system.beta * n_exp * dt)
        )
    if kernel.memory_time > 0 and t_end < 10.0 * kernel.memory_time:
        raise ValueError(
            "simulation window %g shorter than 10 kernel memory times (%g)"
            % (t_end, 10.0 * kernel.memory_time)
        )

    kl, kc = _causal_kernel_samples(system, drive.omega_p, dt)
    H = len(kl)
    s0 = math.sqrt(drive.flux)
    # drive in-coupling: cumulative convolution of K_c with the switched-on
    # pump; trapezoid closure (half weight on the trailing sample) keeps the
    # turn-on ramp second-order accurate
    cum_kc = np.cumsum(kc) * dt
    cum_kc[1:] -= 0.5 * kc[1:] * dt
    kc_inf = complex(np.sum(kc) * dt)

    c0 = kl[0] * dt                    # instantaneous (delta) part of the loss
    omega_ap = system.omega_a - drive.omega_p
    beta = system.beta
    n_steps = int(math.ceil(t_end / dt))
    alphas = np.zeros(n_steps + 1, dtype=complex)
    alphas[0] = complex(initial)

    kl_tail = kl[1:]                   # lags >= 1, units rate/time
    Ht = len(kl_tail)
    denom = 1.0 + 0.5 * dt * c0
    numer = 1.0 - 0.5 * dt * c0
    half_phase_rate = -1j * 0.5 * dt

    def drive_at(k):
        if s0 == 0.0:
            return 0j
        idx = min(k, H - 1)
        return s0 * complex(cum_kc[idx])

    start = 0
    while start < n_steps:
        b = min(block, n_steps - start)
        # far-history force: contributions to outputs start..start+b from
        # samples strictly before the block, via one FFT convolution
        h_eff = min(Ht, start)
        far = np.zeros(b + 1, dtype=complex)
        if h_eff > 0 and Ht > 0:
            hist = alphas[start - h_eff:start]
            kern = np.zeros(max(Ht + 1, b + 2), dtype=complex)
            kern[1:Ht + 1] = kl_tail
            conv = sp_signal.fftconvolve(hist, kern)
            far[:] = conv[h_eff:h_eff + b + 1] * dt
        for m in range(b):
            k = start + m
            a = alphas[k]
            # half Kerr + detuning rotation
            a = a * cmath.exp(half_phase_rate * (omega_ap + beta * (a.real * a.real + a.imag * a.imag)))
            # memory tails at t_k and t_{k+1}; lags >= 1 touch known samples only
            jk = min(m, Ht)
            within_k = np.dot(kl_tail[:jk], alphas[k - jk:k][::-1]) if jk > 0 else 0j
            jk1 = min(m + 1, Ht)
            within_k1 = np.dot(kl_tail[:jk1], alphas[k + 1 - jk1:k + 1][::-1]) if jk1 > 0 else 0j
            tail_k = far[m] + within_k * dt
            tail_k1 = far[m + 1] + within_k1 * dt
            # trapezoid closure of the expanding history window at alpha(0)
            if 1 <= k <= Ht:
                tail_k -= 0.5 * kl_tail[k - 1] * alphas[0] * dt
            if k + 1 <= Ht:
                tail_k1 -= 0.5 * kl_tail[k] * alphas[0] * dt
            f_k = -tail_k + drive_at(k)
            f_k1 = -tail_k1 + drive_at(k + 1)
            a = (a * numer + 0.5 * dt * (f_k + f_k1)) / denom
            a = a * cmath.exp(half_phase_rate * (omega_ap + beta * (a.real * a.real + a.imag * a.imag)))
            alphas[k + 1] = a
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise BlowUpError("blow-up at t = %g: reduce dt or flux" % ((k + 1) * dt))
        start += b

    t = np.arange(n_steps + 1) * dt
    stride = _decimation_stride(t.size, max_samples)
    meta = {"n_steps": n_steps, "history_len": H, "drive_coupling_inf": kc_inf, "stride": stride}
    return Trajectory(
        t=t[::stride], alpha=alphas[::stride], drive=drive, dt=dt, method="split-step", meta=meta
    )


def diagnose_pulsing(
    traj: Trajectory,
    window_fraction: float = 0.5,
    min_periods: int = 20,
) -> PulsingDiagnostics:
    """Oscillation diagnostics on the trailing window of a trajectory.

    The window is linearly detrended; the dominant frequency comes from the
    peak of the discrete spectrum (parabolic sub-bin refinement) and the
    decay rate from a log-envelope fit.  Pulsing means the envelope does not
    decay over the window and the swing is non-negligible.
    """
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must be in (0, 1]")
    n_total = traj.t.size
    i0 = int((1.0 - window_fraction) * n_total)
    t_w = traj.t[i0:]
    n_w = traj.n[i0:]
    if t_w.size < 16:
        raise WindowTooShortError("analysis window has too few samples")
    duration = float(t_w[-1] - t_w[0])
    mean_n = float(np.mean(n_w))
    swing = float((np.max(n_w) - np.min(n_w)) / mean_n) if mean_n > 0 else 0.0

    # detrend
    coeff = np.polyfit(t_w, n_w, 1)
    x = n_w - np.polyval(coeff, t_w)
    rms = float(np.sqrt(np.mean(x**2)))
    if rms <= 1e-12 * max(mean_n, 1.0):
        return PulsingDiagnostics(
            is_pulsing=False, dominant_freq=None, swing_fraction=swing, decay_rate=None
        )

    dt_s = float(t_w[1] - t_w[0])
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    freqs = np.fft.rfftfreq(x.size, d=dt_s)
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < spec.size - 1:
        s_m, s_0, s_p = spec[k - 1], spec[k], spec[k + 1]
        denom = s_m - 2.0 * s_0 + s_p
        shift = 0.5 * (s_m - s_p) / denom if denom != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    f_dom = (freqs[k] + shift * (freqs[1] - freqs[0]))
    dominant = 2.0 * math.pi * float(f_dom)

    periods = dominant * duration / (2.0 * math.pi)
    if periods < min_periods:
        raise WindowTooShortError(
            "window holds %.1f oscillation periods; need at least %d"
            % (periods, min_periods)
        )

    envelope = np.abs(sp_signal.hilbert(x))
    # trim the Hilbert edge artifacts
    trim = max(x.size // 20, 1)
    t_fit = t_w[trim:-trim]
    env_fit = envelope[trim:-trim]
    good = env_fit > 1e-14 * max(mean_n, 1.0)
    if np.count_nonzero(good) < 8:
        return PulsingDiagnostics(
            is_pulsing=False, dominant_freq=dominant, swing_fraction=swing, decay_rate=None
        )
    slope = np.polyfit(t_fit[good], np.log(env_fit[good]), 1)[0]
    decay_rate = float(-slope)
    sustained = decay_rate * duration < 0.25
    return PulsingDiagnostics(
        is_pulsing=bool(sustained and swing > 1e-3),
        dominant_freq=dominant,
        swing_fraction=swing,
        decay_rate=decay_rate,
    )
