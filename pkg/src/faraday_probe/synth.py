"""Synthetic detector time traces of Larmor precession.

Builds the deterministic polarimeter signal A*exp(-t/tau)*sin(w_L t + phi)
from the measurement model, adds white Gaussian shot noise at the raw sample
rate, and applies the causal band-pass of the detection chain.  Noise is
injected with the one-sided power spectral density 2*hbar*omega*P/kappa, so
that after any band-limiting filter the RMS reproduces the shot-noise
formula at the filter's effective integration time 1/(4*ENBW).

Traces round-trip losslessly through a commented CSV format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import butter, sosfilt, sosfreqz

from . import core, lattice
from .errors import TraceFormatError, ValidationError

__all__ = [
    "FilterSpec",
    "Scenario",
    "SignalTrace",
    "analytic_snr",
    "bandpass_filter",
    "detector_bandwidth",
    "effective_tau_pd",
    "filter_effective_tau_pd",
    "filter_noise_bandwidth",
    "predict_amplitude",
    "read_trace",
    "signed_amplitude",
    "synthesize_trace",
    "write_trace",
]

MAX_RIN = 0.02   # total probe power is stable to <= 2 %


@dataclass(frozen=True)
class FilterSpec:
    """Causal Butterworth band-pass of the detection chain.

    ``order`` is the order of the band-pass transfer function itself (pole
    count); the low-pass-to-band-pass transformation doubles the prototype
    order, so it is necessarily even.
    """

    low_cut: float        # Hz
    high_cut: float       # Hz
    order: int = 4

    def __post_init__(self):
        problems = []
        if not 0 < self.low_cut:
            problems.append("low_cut must be > 0")
        if not self.low_cut < self.high_cut:
            problems.append("low_cut must be below high_cut")
        if self.order < 2 or self.order % 2:
            problems.append("order must be an even integer >= 2")
        if problems:
            raise ValidationError(problems)

    def sos(self, sample_rate):
        """Second-order sections for the given sample rate."""
        if not self.high_cut < sample_rate / 2:
            raise ValidationError(
                f"high_cut {self.high_cut} Hz must be below the Nyquist "
                f"frequency {sample_rate / 2} Hz")
        return butter(self.order // 2, [self.low_cut, self.high_cut],
                      btype="bandpass", fs=sample_rate, output="sos")


@dataclass(frozen=True)
class Scenario:
    """Complete description of one synthetic measurement run."""

    transition: core.TransitionSpec
    cloud: core.CloudSpec
    probe: core.ProbeSpec
    lattice: lattice.LatticeSpec
    bias_field: float               # T
    initial_phase: float = 0.0      # rad
    pre_trigger: float = 5e-3       # s of quiet signal before precession
    duration: float = 25e-3         # s of precession
    sample_rate: float = 1e5        # Hz
    background_decay: float = math.inf   # s; dephasing not caused by the probe
    rin: float = 0.0                # fractional intensity noise on the signal
    seed: int = 0

    def __post_init__(self):
        problems = []
        nu_larmor = abs(self.larmor_omega) / (2.0 * math.pi)
        if self.sample_rate < 10.0 * nu_larmor:
            problems.append(
                f"sample_rate {self.sample_rate:.6g} Hz below 10x the Larmor "
                f"frequency {nu_larmor:.6g} Hz")
        if not self.duration > 0:
            problems.append("duration must be > 0")
        if self.pre_trigger < 0:
            problems.append("pre_trigger must be >= 0")
        if not 0 <= self.rin <= MAX_RIN:
            problems.append(f"rin must be in [0, {MAX_RIN}]")
        if not self.background_decay > 0:
            problems.append("background_decay must be > 0")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            problems.append("seed must be an unsigned 64-bit integer")
        expected_sign = lattice.DetuningSign.from_detuning(self.probe.detuning)
        if self.lattice.detuning_sign is not expected_sign:
            problems.append(
                f"lattice detuning_sign {self.lattice.detuning_sign.value} "
                f"inconsistent with probe detuning {self.probe.detuning:.6g}")
        if self.lattice.wavelength != self.transition.wavelength:
            problems.append("lattice wavelength must equal the transition wavelength")
        if problems:
            raise ValidationError(problems)

    @property
    def larmor_omega(self):
        """Precession angular frequency (rad/s, magnitude)."""
        return abs(core.larmor_frequency(self.bias_field,
                                         self.transition.lande_gf,
                                         self.transition.constants))

    @property
    def single_beam_scattering_time(self):
        return core.scattering_time(self.transition,
                                    self.probe.single_beam_intensity,
                                    self.probe.detuning)

    @property
    def lattice_scattering_time(self):
        """Mean time between scattering events in the standing wave (s)."""
        rate = core.scattering_rate(self.transition,
                                    self.probe.single_beam_intensity,
                                    self.probe.detuning)
        rate *= self.lattice.scattering_factor
        return math.inf if rate == 0 else 1.0 / rate

    @property
    def effective_decay(self):
        """Signal decay time including the background dephasing channel (s)."""
        return core.effective_decay_time(self.lattice_scattering_time,
                                         self.background_decay)


def signed_amplitude(scenario):
    """Signed t=0 envelope amplitude: Bragg-corrected differential power (W).

    Odd in the detuning, so the synthesized signal changes sign between red
    and blue lattices.
    """
    bare = core.differential_power(scenario.transition, scenario.cloud,
                                   scenario.probe, core.SpinState(1.0))
    return bare * scenario.lattice.signal_factor


def predict_amplitude(scenario):
    """Deterministic envelope amplitude |signal| at the trigger (W)."""
    return abs(signed_amplitude(scenario))


@dataclass(frozen=True, eq=False)
class SignalTrace:
    """Uniformly sampled differential-power trace.

    Sample i sits at time (i - trigger_index)/sample_rate relative to the
    start of precession; everything before trigger_index is quiet (noise
    only).
    """

    samples: np.ndarray          # W
    sample_rate: float           # Hz
    trigger_index: int
    scenario: Scenario
    filter_spec: FilterSpec | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ValidationError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("samples must be finite")
        if not 0 <= self.trigger_index <= arr.size:
            raise ValidationError("trigger_index out of range")
        object.__setattr__(self, "samples", arr)

    def times(self):
        """Sample times relative to the trigger (s)."""
        idx = np.arange(self.samples.size) - self.trigger_index
        return idx / self.sample_rate


def synthesize_trace(scenario, include_noise=True):
    """Generate one sampled polarimeter trace.

    Quiet (zero-signal) samples for the pre-trigger span, then the damped
    sinusoid; Gaussian shot noise on every sample at the raw-rate power
    spectral density, plus optional multiplicative intensity noise on the
    deterministic part.  Deterministic for a given (scenario, seed);
    ``include_noise=False`` returns the bare closed-form signal.
    """
    fs = scenario.sample_rate
    n_pre = round(scenario.pre_trigger * fs)
    n_post = round(scenario.duration * fs)
    n = n_pre + n_post
    if n_post < 2:
        raise ValidationError("duration too short for the sample rate")

    t = (np.arange(n) - n_pre) / fs
    live = t >= 0.0
    tau = scenario.effective_decay
    decay = np.exp(-t[live] / tau) if math.isfinite(tau) else 1.0
    signal = np.zeros(n)
    signal[live] = (signed_amplitude(scenario) * decay
                    * np.sin(scenario.larmor_omega * t[live]
                             + scenario.initial_phase))

    if include_noise:
        rng = np.random.default_rng(scenario.seed)
        sigma = math.sqrt(scenario.probe.power
                          * scenario.transition.photon_energy
                          * fs / scenario.probe.efficiency)
        noise = sigma * rng.standard_normal(n)
        if scenario.rin > 0:
            signal = signal * (1.0 + scenario.rin * rng.standard_normal(n))
        signal = signal + noise

    return SignalTrace(samples=signal, sample_rate=fs, trigger_index=n_pre,
                       scenario=scenario)


def bandpass_filter(trace, spec):
    """Apply the causal band-pass (zero initial state) to a trace.

    Cascade of second-order sections from the bilinear transform, as in the
    hardware chain; a step at the input produces the familiar decaying
    startup transient.
    """
    sos = spec.sos(trace.sample_rate)
    filtered = sosfilt(sos, trace.samples)
    return replace(trace, samples=filtered, filter_spec=spec)


def effective_tau_pd(bandwidth):
    """Detector time constant equivalent to a noise bandwidth: 1/(4B) (s)."""
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be > 0")
    return 1.0 / (4.0 * bandwidth)


def detector_bandwidth(tau_pd):
    """Noise bandwidth equivalent to a detector time constant: 1/(4*tau) (Hz)."""
    if not tau_pd > 0:
        raise ValidationError("tau_pd must be > 0")
    return 1.0 / (4.0 * tau_pd)


def filter_noise_bandwidth(spec, sample_rate, n_points=1 << 15):
    """One-sided equivalent noise bandwidth of the digital filter (Hz).

    Integral of |H(f)|^2 from 0 to Nyquist (peak gain is 1 for a
    Butterworth band-pass).
    """
    sos = spec.sos(sample_rate)
    freqs, response = sosfreqz(sos, worN=n_points, fs=sample_rate)
    return float(np.trapezoid(np.abs(response) ** 2, freqs))


def filter_effective_tau_pd(spec, sample_rate):
    """Effective integration time of the filtered chain, 1/(4*ENBW) (s)."""
    return effective_tau_pd(filter_noise_bandwidth(spec, sample_rate))


def analytic_snr(scenario, tau_pd=None):
    """Model SNR of the scenario: Bragg-corrected amplitude / shot noise.

    ``tau_pd`` defaults to the scenario's detector time constant; pass
    :func:`filter_effective_tau_pd` of the analysis filter to predict the
    SNR of filtered traces.
    """
    probe = scenario.probe
    if tau_pd is not None:
        probe = replace(probe, detector_time_constant=tau_pd)
    noise = core.shot_noise_rms(probe, scenario.transition.photon_energy)
    return predict_amplitude(scenario) / noise


# ---------------------------------------------------------------------------
# trace file format: commented CSV, lossless at 17 significant digits
# ---------------------------------------------------------------------------

_HEADER = "time_s,diff_power_w"


def _fmt(value):
    if isinstance(value, int):
        return str(value)
    return "%.17g" % value


def _scenario_items(scenario, trigger_index):
    t, c, p = scenario.transition, scenario.cloud, scenario.probe
    return [
        ("schema", 1),
        ("transition.wavelength_m", t.wavelength),
        ("transition.linewidth_rad_s", t.natural_linewidth),
        ("transition.total_spin", t.total_spin),
        ("transition.lande_gf", t.lande_gf),
        ("cloud.atom_number", c.atom_number),
        ("cloud.radius_m", c.radius),
        ("probe.detuning_rad_s", p.detuning),
        ("probe.intensity_w_m2", p.single_beam_intensity),
        ("probe.aperture_radius_m", p.aperture_radius),
        ("probe.efficiency", p.efficiency),
        ("probe.detector_time_constant_s", p.detector_time_constant),
        ("lattice.wavepacket_width_m", scenario.lattice.wavepacket_width),
        ("scenario.bias_field_t", scenario.bias_field),
        ("scenario.initial_phase_rad", scenario.initial_phase),
        ("scenario.pre_trigger_s", scenario.pre_trigger),
        ("scenario.duration_s", scenario.duration),
        ("scenario.sample_rate_hz", scenario.sample_rate),
        ("scenario.background_decay_s", scenario.background_decay),
        ("scenario.rin", scenario.rin),
        ("scenario.seed", scenario.seed),
        ("trace.trigger_index", trigger_index),
    ]


def write_trace(trace, path):
    """Write a trace as commented CSV; byte-identical for identical inputs."""
    lines = [f"# {key} = {_fmt(value)}"
             for key, value in _scenario_items(trace.scenario, trace.trigger_index)]
    lines.append(_HEADER)
    times = trace.times()
    for t_val, y_val in zip(times, trace.samples):
        lines.append("%.17g,%.17g" % (t_val, y_val))
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _parse_float(text, line_no, what):
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(f"invalid {what} {text!r}", line=line_no) from None


def read_trace(path):
    """Read a trace written by :func:`write_trace`.

    Raises :class:`TraceFormatError` with the offending line number on any
    malformed content.
    """
    meta = {}
    samples = []
    header_seen = False
    with open(path) as handle:
        for line_no, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                if header_seen:
                    raise TraceFormatError("comment after data header", line=line_no)
                body = text[1:].strip()
                if "=" not in body:
                    raise TraceFormatError("comment is not 'key = value'", line=line_no)
                key, _, value = body.partition("=")
                meta[key.strip()] = (value.strip(), line_no)
                continue
            if not header_seen:
                if text != _HEADER:
                    raise TraceFormatError(
                        f"expected header {_HEADER!r}, got {text!r}", line=line_no)
                header_seen = True
                continue
            fields = text.split(",")
            if len(fields) != 2:
                raise TraceFormatError(
                    f"expected 2 columns, got {len(fields)}", line=line_no)
            samples.append(_parse_float(fields[1], line_no, "sample"))
    if not header_seen:
        raise TraceFormatError("missing data header", line=None)
    if not samples:
        raise TraceFormatError("no data rows", line=None)

    def take(key, kind=float):
        if key not in meta:
            raise TraceFormatError(f"missing scenario key {key!r}", line=None)
        value, line_no = meta.pop(key)
        if kind is int:
            try:
                return int(value)
            except ValueError:
                raise TraceFormatError(f"invalid integer {value!r}",
                                       line=line_no) from None
        return _parse_float(value, line_no, f"value for {key}")

    take("schema", int)
    wavelength = take("transition.wavelength_m")
    transition = core.TransitionSpec(
        wavelength=wavelength,
        natural_linewidth=take("transition.linewidth_rad_s"),
        total_spin=take("transition.total_spin"),
        lande_gf=take("transition.lande_gf"),
    )
    cloud = core.CloudSpec(atom_number=take("cloud.atom_number"),
                           radius=take("cloud.radius_m"))
    detuning = take("probe.detuning_rad_s")
    probe = core.ProbeSpec(
        detuning=detuning,
        single_beam_intensity=take("probe.intensity_w_m2"),
        aperture_radius=take("probe.aperture_radius_m"),
        efficiency=take("probe.efficiency"),
        detector_time_constant=take("probe.detector_time_constant_s"),
    )
    lat = lattice.LatticeSpec(
        detuning_sign=lattice.DetuningSign.from_detuning(detuning),
        wavepacket_width=take("lattice.wavepacket_width_m"),
        wavelength=wavelength,
    )
    scenario = Scenario(
        transition=transition, cloud=cloud, probe=probe, lattice=lat,
        bias_field=take("scenario.bias_field_t"),
        initial_phase=take("scenario.initial_phase_rad"),
        pre_trigger=take("scenario.pre_trigger_s"),
        duration=take("scenario.duration_s"),
        sample_rate=take("scenario.sample_rate_hz"),
        background_decay=take("scenario.background_decay_s"),
        rin=take("scenario.rin"),
        seed=take("scenario.seed", int),
    )
    trigger_index = take("trace.trigger_index", int)
    if meta:
        key = next(iter(meta))
        raise TraceFormatError(f"unknown scenario key {key!r}", line=meta[key][1])
    if not 0 <= trigger_index <= len(samples):
        raise TraceFormatError("trigger_index out of range", line=None)
    return SignalTrace(samples=np.array(samples), sample_rate=scenario.sample_rate,
                       trigger_index=trigger_index, scenario=scenario)
