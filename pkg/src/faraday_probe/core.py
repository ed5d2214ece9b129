"""Closed-form model of shot-noise-limited Faraday-rotation spin detection.

Implements the dispersive signal chain (circular refractive indices ->
differential phase -> differential detected power), the shot-noise floor,
the minimum detectable spin polarization and SNR, detection-aperture
optimization, photon-scattering decoherence rates, and the projection-noise
backaction figure of merit eta.

Everything is SI.  Detunings and linewidths are angular frequencies (rad/s);
``delta / gamma`` is the only combination that enters the formulas.  All
functions are pure: no global state, safe for concurrent use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import scipy.constants as _sc

from .errors import ModelValidityWarning, ValidationError

__all__ = [
    "CODATA",
    "BackactionReport",
    "CloudSpec",
    "PhysicalConstants",
    "ProbeSpec",
    "SpinState",
    "TransitionSpec",
    "aperture_factor",
    "backaction_eta",
    "backaction_eta_from_od",
    "backaction_od_prefactor",
    "backaction_prefactor",
    "cavity_enhanced_eta",
    "circular_indices",
    "differential_intensity",
    "differential_intensity_linearized",
    "differential_phase",
    "differential_power",
    "effective_decay_time",
    "larmor_frequency",
    "min_detectable_spin",
    "min_detectable_spin_optimal",
    "min_detectable_spin_vs_power",
    "optimal_aperture",
    "projection_noise",
    "regime_warnings",
    "resonant_optical_depth",
    "scalar_polarizability",
    "scattering_rate",
    "scattering_time",
    "sensitivity_prefactor",
    "shot_noise_rms",
    "snr",
    "snr_prefactor",
]


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants compiled into the artifact; all strictly positive."""

    hbar: float = _sc.hbar                  # J s
    c: float = _sc.c                        # m / s
    epsilon0: float = _sc.epsilon_0         # F / m
    bohr_magneton: float = _sc.physical_constants["Bohr magneton"][0]  # J / T
    planck_h: float = _sc.h                 # J s

    def __post_init__(self):
        bad = [n for n in ("hbar", "c", "epsilon0", "bohr_magneton", "planck_h")
               if getattr(self, n) <= 0]
        if bad:
            raise ValidationError([f"{n} must be strictly positive" for n in bad])


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class TransitionSpec:
    """One optical transition of the probed atom.

    ``natural_linewidth`` is the angular linewidth (rad/s), i.e. 2*pi times
    the linewidth in Hz.  ``total_spin`` is the ground hyperfine F
    (half-integers allowed).
    """

    wavelength: float          # m
    natural_linewidth: float   # rad/s
    total_spin: float          # F
    lande_gf: float
    constants: PhysicalConstants = field(default=CODATA)

    def __post_init__(self):
        problems = []
        if not self.wavelength > 0:
            problems.append("wavelength must be > 0")
        if not self.natural_linewidth > 0:
            problems.append("natural_linewidth must be > 0")
        if not self.total_spin > 0:
            problems.append("total_spin must be > 0")
        if problems:
            raise ValidationError(problems)

    @property
    def cross_section(self):
        """Resonant photon scattering cross section, 3*lambda^2 / 2*pi (m^2)."""
        return 3.0 * self.wavelength**2 / (2.0 * math.pi)

    @property
    def saturation_intensity(self):
        """Saturation intensity 2*pi^2*hbar*c*Gamma / 3*lambda^3 (W/m^2)."""
        k = self.constants
        return (2.0 * math.pi**2 * k.hbar * k.c * self.natural_linewidth
                / (3.0 * self.wavelength**3))

    @property
    def photon_energy(self):
        """Energy of one probe photon, h*c/lambda (J)."""
        return self.constants.planck_h * self.constants.c / self.wavelength

    @property
    def wavenumber(self):
        """Vacuum wavenumber k = 2*pi/lambda (rad/m)."""
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class CloudSpec:
    """Gaussian atom cloud: N atoms, transverse column density
    n_col(r) = N/(2*pi*L^2) * exp(-r^2 / 2 L^2), which integrates to N.
    """

    atom_number: float   # N
    radius: float        # L, m

    def __post_init__(self):
        problems = []
        if not self.atom_number >= 1:
            problems.append("atom_number must be >= 1")
        if not self.radius > 0:
            problems.append("radius must be > 0")
        if problems:
            raise ValidationError(problems)

    def column_density(self, r):
        """Column density at transverse radius r (m^-2)."""
        ll = self.radius**2
        return self.atom_number / (2.0 * math.pi * ll) * math.exp(-r * r / (2.0 * ll))


@dataclass(frozen=True)
class ProbeSpec:
    """Probe beam and detector parameters.

    The probe intensity is taken as uniform across the detection aperture
    (beam much larger than the cloud), so the detected power is
    P = I * pi * a^2.
    """

    detuning: float                # rad/s, signed, nonzero
    single_beam_intensity: float   # W/m^2
    aperture_radius: float         # m
    efficiency: float              # kappa, in (0, 1]
    detector_time_constant: float  # tau_pd, s

    def __post_init__(self):
        problems = []
        if self.detuning == 0:
            problems.append("detuning must be nonzero")
        if self.single_beam_intensity < 0:
            problems.append("single_beam_intensity must be >= 0")
        if not self.aperture_radius > 0:
            problems.append("aperture_radius must be > 0")
        if not 0 < self.efficiency <= 1:
            problems.append("efficiency must be in (0, 1]")
        if not self.detector_time_constant > 0:
            problems.append("detector_time_constant must be > 0")
        if problems:
            raise ValidationError(problems)

    @property
    def power(self):
        """Power through the aperture at uniform intensity, I*pi*a^2 (W)."""
        return self.single_beam_intensity * math.pi * self.aperture_radius**2


@dataclass(frozen=True)
class SpinState:
    """Normalized spin projection <F_z>/F along the probe axis, in [-1, 1].

    The same number describes a single atom or the collective spin of N
    identical atoms (F_z_total / (N*F)); the formulas only ever see the
    normalized projection.
    """

    fz: float = 1.0

    def __post_init__(self):
        if not abs(self.fz) <= 1:
            raise ValidationError("spin projection must satisfy |fz| <= 1")


@dataclass(frozen=True)
class BackactionReport:
    """Projection noise vs measurement sensitivity and their ratio eta.

    eta > 1 means the measurement resolves better than the coherent-state
    projection noise and appreciably disturbs (squeezes) the collective spin.
    """

    projection_noise: float   # Delta F_z / F of the coherent state
    sensitivity: float        # delta F_z / F of the measurement
    eta: float                # projection_noise / sensitivity
    optical_depth: float

    def __post_init__(self):
        if min(self.projection_noise, self.sensitivity,
               self.eta, self.optical_depth) <= 0:
            raise ValidationError("all backaction figures must be > 0")


# ---------------------------------------------------------------------------
# dispersive signal chain
# ---------------------------------------------------------------------------

def _require_detuning(detuning):
    if detuning == 0:
        raise ValidationError("detuning must be nonzero")


def scalar_polarizability(transition, detuning):
    """Far-detuned two-level scalar polarizability (SI, C^2 m^2 / J).

    alpha(delta) = -3 eps0 lambda^3 Gamma / (8 pi^2 delta); opposite in sign
    to the detuning.
    """
    _require_detuning(detuning)
    k = transition.constants
    return (-3.0 * k.epsilon0 * transition.wavelength**3
            * transition.natural_linewidth / (8.0 * math.pi**2 * detuning))


def circular_indices(transition, density, detuning, spin):
    """Refractive indices (n_plus, n_minus) for the two circular components.

    n_pm = 1 + rho*alpha/(2 eps0) * (2/3 +- fz/3) for atom density rho (m^-3).
    """
    if density < 0:
        raise ValidationError("density must be >= 0")
    coupling = (density * scalar_polarizability(transition, detuning)
                / (2.0 * transition.constants.epsilon0))
    n_plus = 1.0 + coupling * (2.0 + spin.fz) / 3.0
    n_minus = 1.0 + coupling * (2.0 - spin.fz) / 3.0
    return n_plus, n_minus


def differential_phase(transition, column_density, detuning, spin):
    """Phase shift between circular components after the sample (rad).

    phi = -(1/6) * sigma*rho*l / (delta/Gamma) * fz, with sigma*rho*l the
    resonant optical depth along the path.  Odd in both fz and the detuning.
    """
    if column_density < 0:
        raise ValidationError("column_density must be >= 0")
    _require_detuning(detuning)
    depth = transition.cross_section * column_density
    return -depth * transition.natural_linewidth * spin.fz / (6.0 * detuning)


def differential_intensity(intensity, phase):
    """Polarimeter differential intensity I_x - I_y = -I*sin(phi) (W/m^2)."""
    if intensity < 0:
        raise ValidationError("intensity must be >= 0")
    return -intensity * math.sin(phase)


def differential_intensity_linearized(intensity, phase):
    """Small-angle form of :func:`differential_intensity`: -I*phi."""
    if intensity < 0:
        raise ValidationError("intensity must be >= 0")
    return -intensity * phase


def aperture_factor(aperture_radius, cloud_radius):
    """Fraction 1 - exp(-a^2 / 2 L^2) of the cloud inside the aperture."""
    u = aperture_radius**2 / (2.0 * cloud_radius**2)
    return -math.expm1(-u)


def differential_power(transition, cloud, probe, spin):
    """Detected differential power from the Gaussian cloud, W.

    Linearized polarimeter signal integrated over a centered aperture of
    radius a at uniform probe intensity:

        (1/6) * P/(delta/Gamma) * sigma*N/(pi a^2) * (1 - e^{-a^2/2L^2}) * fz

    Signed: odd in fz and in the detuning.
    """
    _require_detuning(probe.detuning)
    a2 = probe.aperture_radius**2
    depth_avg = transition.cross_section * cloud.atom_number / (math.pi * a2)
    ratio = probe.detuning / transition.natural_linewidth
    return (probe.power * depth_avg * aperture_factor(probe.aperture_radius, cloud.radius)
            * spin.fz / (6.0 * ratio))


# ---------------------------------------------------------------------------
# noise floor and sensitivity
# ---------------------------------------------------------------------------

def shot_noise_rms(probe, photon_energy):
    """RMS shot-noise fluctuation of the differential power (W).

    sqrt(P * hbar*omega / (2 kappa tau_pd)) for detected power P, detection
    efficiency kappa and detector time constant tau_pd.
    """
    if probe.power <= 0:
        raise ValidationError("detected power must be > 0")
    if photon_energy <= 0:
        raise ValidationError("photon_energy must be > 0")
    return math.sqrt(probe.power * photon_energy
                     / (2.0 * probe.efficiency * probe.detector_time_constant))


def min_detectable_spin_vs_power(transition, cloud, probe):
    """Smallest detectable |fz| at the configured aperture and power.

    Obtained by equating the differential-power signal slope to the
    shot-noise RMS; depends on the detuning only through |delta|/Gamma and
    on the probe power as 1/sqrt(P).
    """
    noise = shot_noise_rms(probe, transition.photon_energy)
    slope = abs(differential_power(transition, cloud, probe, SpinState(1.0)))
    return noise / slope


def scattering_rate(transition, intensity, detuning):
    """Photon scattering rate per atom for a single traveling beam (1/s).

    gamma_s = (Gamma/12) * (I/I0) / (delta/Gamma)^2; even in the detuning.
    """
    if intensity < 0:
        raise ValidationError("intensity must be >= 0")
    _require_detuning(detuning)
    ratio = detuning / transition.natural_linewidth
    return (transition.natural_linewidth / 12.0
            * (intensity / transition.saturation_intensity) / ratio**2)


def scattering_time(transition, intensity, detuning):
    """Mean time between photon scattering events, 1/gamma_s (s; inf at I=0)."""
    rate = scattering_rate(transition, intensity, detuning)
    return math.inf if rate == 0 else 1.0 / rate


def min_detectable_spin(transition, cloud, probe, tau_s):
    """Smallest detectable |fz| expressed through the scattering time.

    sqrt(2)*pi*a / (lambda N sqrt(kappa) (1 - e^{-a^2/2L^2})) *
    sqrt(tau_s/tau_pd).  Given tau_s, independent of intensity and detuning
    individually.
    """
    if not tau_s > 0:
        raise ValidationError("tau_s must be > 0")
    factor = aperture_factor(probe.aperture_radius, cloud.radius)
    return (math.sqrt(2.0) * math.pi * probe.aperture_radius
            / (transition.wavelength * cloud.atom_number
               * math.sqrt(probe.efficiency) * factor)
            * math.sqrt(tau_s / probe.detector_time_constant))


# ---------------------------------------------------------------------------
# aperture optimization; the numeric prefactors are always rederived from it
# ---------------------------------------------------------------------------

def _aperture_optimum_u(tol=1e-12):
    """Root of e^u = 1 + 2u on [0.5, 3] by bisection (monotone bracket)."""
    def f(u):
        return math.expm1(u) - 2.0 * u

    lo, hi = 0.5, 3.0
    if not (f(lo) < 0 < f(hi)):
        raise ValidationError("aperture optimum bracket invalid")
    while (hi - lo) > tol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimal_aperture(cloud_radius, tol=1e-12):
    """Aperture radius minimizing the detectable spin, ~1.585 * L (m)."""
    if not cloud_radius > 0:
        raise ValidationError("cloud_radius must be > 0")
    return cloud_radius * math.sqrt(2.0 * _aperture_optimum_u(tol))


def sensitivity_prefactor(tol=1e-12):
    """Dimensionless prefactor of the optimal-aperture sensitivity (~9.85)."""
    u = _aperture_optimum_u(tol)
    return math.sqrt(2.0) * math.pi * math.sqrt(2.0 * u) / -math.expm1(-u)


def snr_prefactor(tol=1e-12):
    """Dimensionless prefactor of the optimal-aperture SNR (~0.1016)."""
    return 1.0 / sensitivity_prefactor(tol)


def backaction_prefactor(tol=1e-12):
    """Prefactor of eta in the (lambda/L)*sqrt(kappa N/F) form (~0.0718)."""
    return 1.0 / (math.sqrt(2.0) * sensitivity_prefactor(tol))


def backaction_od_prefactor(tol=1e-12):
    """Prefactor of eta in the sqrt(kappa O/F) optical-depth form (~0.26)."""
    return backaction_prefactor(tol) * 2.0 * math.pi / math.sqrt(3.0)


def min_detectable_spin_optimal(transition, cloud, efficiency, tau_pd, tau_s,
                                tol=1e-12):
    """Smallest detectable |fz| at the optimal aperture.

    Equals :func:`min_detectable_spin` evaluated at a = optimal_aperture(L):
    ~9.85 * L/(lambda N sqrt(kappa)) * sqrt(tau_s/tau_pd).
    """
    if not 0 < efficiency <= 1:
        raise ValidationError("efficiency must be in (0, 1]")
    if not tau_pd > 0 or not tau_s > 0:
        raise ValidationError("tau_pd and tau_s must be > 0")
    return (sensitivity_prefactor(tol) * cloud.radius
            / (transition.wavelength * cloud.atom_number * math.sqrt(efficiency))
            * math.sqrt(tau_s / tau_pd))


def snr(transition, cloud, efficiency, tau_pd, tau_s, tol=1e-12):
    """SNR for a full spin swing (fz: 0 -> 1) at the optimal aperture.

    Reciprocal of :func:`min_detectable_spin_optimal`:
    ~0.1016 * lambda N sqrt(kappa)/L * sqrt(tau_pd/tau_s).
    """
    return 1.0 / min_detectable_spin_optimal(transition, cloud, efficiency,
                                             tau_pd, tau_s, tol)


# ---------------------------------------------------------------------------
# projection noise and backaction
# ---------------------------------------------------------------------------

def projection_noise(atom_number, total_spin):
    """Fractional projection noise of an N-atom spin-coherent state.

    Delta F_z_total / F_total = 1 / sqrt(2 F N).
    """
    if not atom_number >= 1:
        raise ValidationError("atom_number must be >= 1")
    if not total_spin > 0:
        raise ValidationError("total_spin must be > 0")
    return 1.0 / math.sqrt(2.0 * total_spin * atom_number)


def resonant_optical_depth(transition, cloud):
    """Resonant optical depth through the cloud center, sigma*N / 2*pi*L^2."""
    return (transition.cross_section * cloud.atom_number
            / (2.0 * math.pi * cloud.radius**2))


def backaction_eta(transition, cloud, efficiency, tau_pd, tau_s, tol=1e-12):
    """Backaction figure of merit eta = projection noise / sensitivity.

    Uses the optimal-aperture sensitivity and the transition's total spin F;
    eta > 1 marks the regime where the measurement squeezes the sample.
    """
    noise = projection_noise(cloud.atom_number, transition.total_spin)
    sens = min_detectable_spin_optimal(transition, cloud, efficiency,
                                       tau_pd, tau_s, tol)
    return BackactionReport(
        projection_noise=noise,
        sensitivity=sens,
        eta=noise / sens,
        optical_depth=resonant_optical_depth(transition, cloud),
    )


def backaction_eta_from_od(optical_depth, efficiency, total_spin, tau_pd,
                           tau_s, tol=1e-12):
    """eta expressed through the resonant optical depth O.

    ~0.26 * sqrt(kappa O / F) * sqrt(tau_pd/tau_s); algebraically identical
    to :func:`backaction_eta` whenever O = sigma*N / 2*pi*L^2.
    """
    if not optical_depth > 0:
        raise ValidationError("optical_depth must be > 0")
    if not 0 < efficiency <= 1:
        raise ValidationError("efficiency must be in (0, 1]")
    if not total_spin > 0:
        raise ValidationError("total_spin must be > 0")
    if not tau_pd > 0 or not tau_s > 0:
        raise ValidationError("tau_pd and tau_s must be > 0")
    return (backaction_od_prefactor(tol)
            * math.sqrt(efficiency * optical_depth / total_spin)
            * math.sqrt(tau_pd / tau_s))


# ---------------------------------------------------------------------------
# auxiliary rates
# ---------------------------------------------------------------------------

def larmor_frequency(field_t, lande_gf, constants=CODATA):
    """Larmor angular frequency g_F * mu_B * B / hbar (rad/s)."""
    if field_t < 0:
        raise ValidationError("field must be >= 0")
    return lande_gf * constants.bohr_magneton * field_t / constants.hbar


def effective_decay_time(tau_s, tau_background=math.inf):
    """Combined decay time of independent exponential channels (s).

    Rates add: 1/tau = 1/tau_s + 1/tau_background.  An infinite background
    time leaves tau_s unchanged.
    """
    if not tau_s > 0:
        raise ValidationError("tau_s must be > 0")
    if not tau_background > 0:
        raise ValidationError("tau_background must be > 0")
    if math.isinf(tau_background):
        return tau_s
    if math.isinf(tau_s):
        return tau_background
    return 1.0 / (1.0 / tau_s + 1.0 / tau_background)


def cavity_enhanced_eta(eta, finesse):
    """Backaction figure of merit inside a buildup cavity: eta*sqrt(finesse)."""
    if finesse < 1:
        raise ValidationError("finesse must be >= 1")
    return eta * math.sqrt(finesse)


def regime_warnings(transition, probe, emit=True):
    """Diagnostics for leaving the model's validity regime (never errors).

    Flags |delta|/Gamma < 100 (hyperfine structure no longer negligible) and
    saturation parameter (I/I0) * (Gamma/2 delta)^2 > 0.1.  Returns the list
    of messages; with ``emit`` they are also raised as ModelValidityWarning
    so parameter sweeps can cross regime boundaries without failing.
    """
    messages = []
    ratio = abs(probe.detuning) / transition.natural_linewidth
    if ratio < 100:
        messages.append(
            f"|detuning|/linewidth = {ratio:.3g} < 100; the far-detuned "
            "two-level reduction is questionable")
    sat = (probe.single_beam_intensity / transition.saturation_intensity
           / (4.0 * ratio**2))
    if sat > 0.1:
        messages.append(
            f"saturation parameter {sat:.3g} > 0.1; low-saturation "
            "assumption is questionable")
    if emit:
        for msg in messages:
            warnings.warn(msg, ModelValidityWarning, stacklevel=2)
    return messages
