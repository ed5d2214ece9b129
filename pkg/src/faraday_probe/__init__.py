"""Faraday-rotation spin measurement workbench.

Closed-form sensitivity/backaction model for continuous polarimetric
detection of trapped-atom spins, standing-wave (lattice) corrections, a
synthetic detector-trace generator with shot noise and a causal band-pass
chain, and the matching damped-sinusoid analysis pipeline.
"""

from .analysis import (
    FitResult,
    ScalingFit,
    ScalingPoint,
    fit_damped_sinusoid,
    infer_atom_number,
    measure_snr,
    rms_noise,
    scaling_fit,
)
from .core import (
    CODATA,
    BackactionReport,
    CloudSpec,
    PhysicalConstants,
    ProbeSpec,
    SpinState,
    TransitionSpec,
    backaction_eta,
    backaction_eta_from_od,
    cavity_enhanced_eta,
    circular_indices,
    differential_intensity,
    differential_phase,
    differential_power,
    effective_decay_time,
    larmor_frequency,
    min_detectable_spin,
    min_detectable_spin_optimal,
    min_detectable_spin_vs_power,
    optimal_aperture,
    projection_noise,
    resonant_optical_depth,
    scalar_polarizability,
    scattering_rate,
    scattering_time,
    shot_noise_rms,
    snr,
)
from .errors import (
    DataError,
    ModelValidityWarning,
    TraceFormatError,
    ValidationError,
)
from .lattice import (
    DetuningSign,
    LatticeSpec,
    beta_from_ratio,
    bragg_signal_factor,
    debye_waller,
    lattice_scattering_factor,
    position_signal,
    wavepacket_averaged_signal,
)
from .synth import (
    FilterSpec,
    Scenario,
    SignalTrace,
    analytic_snr,
    bandpass_filter,
    detector_bandwidth,
    effective_tau_pd,
    filter_effective_tau_pd,
    filter_noise_bandwidth,
    predict_amplitude,
    read_trace,
    signed_amplitude,
    synthesize_trace,
    write_trace,
)

__version__ = "0.1.0"
