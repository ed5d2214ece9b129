"""Data reduction for Larmor-precession traces.

Mirrors the measurement pipeline: the quiet pre-trigger segment gives the
RMS noise, a damped sinusoid A*exp(-t/tau)*sin(w t + phi) is fitted to the
precession segment, and SNR = fitted amplitude / RMS noise.  A scaling
regression of SNR against the photon scattering time recovers the -1/2
power law and the atom number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import core
from .errors import DataError, ValidationError

__all__ = [
    "FitResult",
    "ScalingFit",
    "ScalingPoint",
    "fit_damped_sinusoid",
    "infer_atom_number",
    "measure_snr",
    "rms_noise",
    "scaling_fit",
]

MAX_ITERATIONS = 200
RELATIVE_STEP_TOL = 1e-8


@dataclass(frozen=True)
class FitResult:
    """Damped-sinusoid parameters extracted from one trace.

    The amplitude is canonicalized to A >= 0 with phase in [0, 2*pi);
    ``stderr`` holds the estimated one-sigma uncertainties of
    (A, tau, omega, phi) from the final-iterate normal equations.
    """

    amplitude: float           # W, envelope amplitude at the trigger
    decay_time: float          # s
    angular_frequency: float   # rad/s
    phase: float               # rad
    residual_rms: float        # W
    converged: bool
    iterations: int
    stderr: tuple = None

    def __post_init__(self):
        if self.amplitude < 0 or self.decay_time <= 0 or self.residual_rms < 0:
            raise ValidationError("fit result out of range")


class ScalingPoint(NamedTuple):
    """One (scattering time, measured SNR) point; detuning is a label only."""

    tau_s: float
    measured_snr: float
    detuning: float = math.nan


class ScalingFit(NamedTuple):
    slope: float
    intercept: float      # of log SNR at log tau_s = 0
    inferred_n: float


def _window_mask(times, window):
    t0, t1 = window
    if not t0 < t1:
        raise ValidationError("window start must precede window end")
    return (times >= t0) & (times <= t1)


def rms_noise(trace, window=None):
    """Sample standard deviation of a quiet segment (W).

    ``window`` is (t0, t1) in trigger-relative seconds and must lie entirely
    before the trigger; the default is the whole pre-trigger span.  At least
    50 samples are required.
    """
    times = trace.times()
    if window is None:
        mask = times < 0.0
    else:
        if window[1] > 0.0:
            raise ValidationError("noise window overlaps the signal region")
        mask = _window_mask(times, window) & (times < 0.0)
    n = int(mask.sum())
    if n < 50:
        raise ValidationError(f"noise window holds {n} samples; need >= 50")
    return float(np.std(trace.samples[mask]))


def _model(params, t):
    amplitude, tau, omega, phi = params
    return amplitude * np.exp(-t / tau) * np.sin(omega * t + phi)


def _jacobian(params, t):
    amplitude, tau, omega, phi = params
    envelope = np.exp(-t / tau)
    sin_part = np.sin(omega * t + phi)
    cos_part = np.cos(omega * t + phi)
    return np.column_stack([
        envelope * sin_part,
        amplitude * t / tau**2 * envelope * sin_part,
        amplitude * t * envelope * cos_part,
        amplitude * envelope * cos_part,
    ])


def _frequency_guess(y, fs):
    """Angular frequency from the discrete-spectrum peak, refined by
    parabolic interpolation of the log magnitude."""
    spectrum = np.abs(np.fft.rfft(y - y.mean()))
    if spectrum.size < 3:
        raise ValidationError("fit window too short for a spectrum")
    k = int(np.argmax(spectrum[1:])) + 1
    if 1 <= k <= spectrum.size - 2:
        with np.errstate(divide="ignore"):
            logm = np.log(np.maximum(spectrum[k - 1:k + 2], 1e-300))
        denom = logm[0] - 2.0 * logm[1] + logm[2]
        shift = 0.5 * (logm[0] - logm[2]) / denom if denom < 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    freq = (k + shift) * fs / y.size
    peak_amp = 2.0 * spectrum[k] / y.size
    return 2.0 * math.pi * freq, peak_amp


def _decay_guess(t, y, blocks=8):
    """Decay time from a linear fit to the log block-RMS envelope."""
    edges = np.linspace(0, y.size, blocks + 1, dtype=int)
    centers, levels = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo < 4:
            continue
        level = math.sqrt(2.0) * float(np.std(y[lo:hi]))
        if level > 0:
            centers.append(float(np.mean(t[lo:hi])))
            levels.append(math.log(level))
    span = t[-1] - t[0]
    if len(centers) < 2:
        return 10.0 * span
    slope = np.polyfit(centers, levels, 1)[0]
    if slope >= -1.0 / (100.0 * span):
        return 10.0 * span   # effectively undamped over the window
    return float(min(-1.0 / slope, 100.0 * span))


def _phase_amplitude_guess(t, y, tau, omega):
    """Amplitude and phase from linear projection onto the damped quadratures."""
    envelope = np.exp(-t / tau)
    basis = np.column_stack([envelope * np.sin(omega * t),
                             envelope * np.cos(omega * t)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    amplitude = float(np.hypot(*coef))
    phase = float(math.atan2(coef[1], coef[0]))
    return max(amplitude, 1e-300), phase


def fit_damped_sinusoid(trace, fit_window=None):
    """Nonlinear least-squares fit of A*exp(-t/tau)*sin(w t + phi).

    Damped Gauss-Newton iteration: a step is accepted only if it lowers the
    sum of squares; on rejection the damping grows tenfold, on acceptance it
    shrinks tenfold.  Convergence means the relative parameter change of an
    accepted step fell below 1e-8 within 200 iterations.

    ``fit_window`` is (t0, t1) in trigger-relative seconds with t0 >= 0; the
    default starts 3/f_low after the trigger for filtered traces (skipping
    the filter's startup transient) and at the trigger otherwise.
    """
    times = trace.times()
    if fit_window is None:
        start = 3.0 / trace.filter_spec.low_cut if trace.filter_spec else 0.0
        fit_window = (start, float(times[-1]))
    if fit_window[0] < 0:
        raise ValidationError("fit window must start at or after the trigger")
    mask = _window_mask(times, fit_window)
    t = times[mask]
    y = trace.samples[mask]
    if t.size < 16:
        raise ValidationError(f"fit window holds {t.size} samples; need >= 16")
    if not np.all(np.isfinite(y)):
        raise DataError("trace contains non-finite samples")

    fs = trace.sample_rate
    nu_larmor = trace.scenario.larmor_omega / (2.0 * math.pi)
    if fs < 8.0 * nu_larmor:
        raise ValidationError(
            "fewer than 8 samples per Larmor period in the fit window")
    omega, _ = _frequency_guess(y, fs)
    tau = _decay_guess(t, y)
    amplitude, phi = _phase_amplitude_guess(t, y, tau, omega)

    params = np.array([amplitude, tau, omega, phi])
    residual = _model(params, t) - y
    cost = float(residual @ residual)
    damping = 1e-3
    converged = False
    iterations = 0
    tau_max = 1e6 * (t[-1] - t[0])   # beyond this the window sees no decay
    for iterations in range(1, MAX_ITERATIONS + 1):
        jac = _jacobian(params, t)
        gradient = jac.T @ residual
        hessian = jac.T @ jac
        diag = np.diag(hessian).copy()
        diag[diag <= 0] = 1e-300
        try:
            step = np.linalg.solve(hessian + damping * np.diag(diag), -gradient)
        except np.linalg.LinAlgError:
            damping *= 10.0
            continue
        trial = params + step
        if not 0 < trial[1] <= tau_max:   # decay time positive and finite
            damping *= 10.0
            if damping > 1e14:
                break
            continue
        trial_residual = _model(trial, t) - y
        trial_cost = float(trial_residual @ trial_residual)
        relative = float(np.max(np.abs(step) / (np.abs(params) + 1e-300)))
        if trial_cost < cost:
            params, residual, cost = trial, trial_residual, trial_cost
            damping = max(damping / 10.0, 1e-14)
            if relative < RELATIVE_STEP_TOL:
                converged = True
                break
        else:
            if relative < RELATIVE_STEP_TOL:
                converged = True   # pinned at the minimum; cannot move
                break
            damping *= 10.0
            if damping > 1e14:
                break

    amplitude, tau, omega, phi = params
    if omega < 0:
        omega, phi = -omega, math.pi - phi
    if amplitude < 0:
        amplitude, phi = -amplitude, phi + math.pi
    phi = phi % (2.0 * math.pi)
    params = np.array([amplitude, tau, omega, phi])

    stderr = None
    dof = t.size - 4
    if dof > 0:
        jac = _jacobian(params, t)
        try:
            covariance = np.linalg.inv(jac.T @ jac) * (cost / dof)
            stderr = tuple(np.sqrt(np.maximum(np.diag(covariance), 0.0)))
        except np.linalg.LinAlgError:
            stderr = None

    return FitResult(
        amplitude=float(amplitude),
        decay_time=float(tau),
        angular_frequency=float(omega),
        phase=float(phi),
        residual_rms=float(math.sqrt(cost / t.size)),
        converged=converged,
        iterations=iterations,
        stderr=stderr,
    )


def measure_snr(trace, fit_window=None, noise_window=None):
    """SNR of one trace: fitted amplitude over pre-trigger RMS noise.

    Excludes intermodulation noise by construction (the noise estimate comes
    from the zero-signal segment).  Invariant under rescaling the trace.
    """
    if trace.trigger_index < 50:
        raise ValidationError("trace has no usable pre-trigger segment")
    noise = rms_noise(trace, noise_window)
    fit = fit_damped_sinusoid(trace, fit_window)
    return fit.amplitude / noise


def infer_atom_number(measured_snr, tau_s, tau_pd, efficiency, radius,
                      wavelength, correction=1.0):
    """Atom number implied by a measured SNR via the optimal-aperture law.

    ``correction`` bundles the caller's signal corrections (Bragg
    enhancement, polarimeter-path birefringence, spin alignment); halving it
    doubles the inferred N.
    """
    if measured_snr <= 0 or tau_s <= 0 or tau_pd <= 0:
        raise ValidationError("measured_snr, tau_s and tau_pd must be > 0")
    if not 0 < efficiency <= 1:
        raise ValidationError("efficiency must be in (0, 1]")
    if radius <= 0 or wavelength <= 0:
        raise ValidationError("radius and wavelength must be > 0")
    if not 0 < correction <= 2:
        raise ValidationError("correction must be in (0, 2]")
    prefactor = core.snr_prefactor()
    return (measured_snr * radius
            / (prefactor * wavelength * math.sqrt(efficiency) * correction
               * math.sqrt(tau_pd / tau_s)))


def scaling_fit(points, *, wavelength, radius, efficiency, tau_pd,
                correction=1.0):
    """Power-law regression of measured SNR against scattering time.

    Least-squares line in (log tau_s, log SNR).  The atom number is inferred
    by inverting the SNR law on the fitted line at the centroid of the data
    (the line always passes through it), which keeps the inference
    insensitive to slope noise; the intercept at log tau_s = 0 is returned
    as well.
    """
    points = list(points)
    if len(points) < 3:
        raise ValidationError("need at least 3 scaling points")
    tau_values = np.array([p.tau_s for p in points], dtype=float)
    snr_values = np.array([p.measured_snr for p in points], dtype=float)
    if np.any(tau_values <= 0) or np.any(snr_values <= 0):
        raise ValidationError("scaling points must have positive tau_s and SNR")
    if tau_values.max() / tau_values.min() < 10.0:
        raise ValidationError("tau_s values must span at least one decade")
    log_tau = np.log(tau_values)
    log_snr = np.log(snr_values)
    slope, intercept = np.polyfit(log_tau, log_snr, 1)
    center_tau = float(np.exp(np.mean(log_tau)))
    center_snr = float(np.exp(np.mean(log_snr)))
    inferred = infer_atom_number(center_snr, center_tau, tau_pd, efficiency,
                                 radius, wavelength, correction)
    return ScalingFit(slope=float(slope), intercept=float(intercept),
                      inferred_n=inferred)
