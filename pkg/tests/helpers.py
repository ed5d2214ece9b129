"""Shared builders for the test suite (cesium D2 defaults)."""

import math

from faraday_probe import core, lattice, synth

CS_WAVELENGTH = 852e-9
CS_LINEWIDTH = 2.0 * math.pi * 5.22e6   # rad/s
CESIUM = core.TransitionSpec(CS_WAVELENGTH, CS_LINEWIDTH, 4.0, 0.25)

FIG_INTENSITY = 18099.29   # W/m^2; lattice tau_s = 6.2 ms at -50 GHz
BETA_TYPICAL = lattice.debye_waller(44.5e-9, CS_WAVELENGTH)


def make_probe(detuning=-2.0 * math.pi * 50e9, intensity=FIG_INTENSITY,
               aperture=None, efficiency=0.29, tau_pd=125e-6, radius=350e-6):
    if aperture is None:
        aperture = core.optimal_aperture(radius)
    return core.ProbeSpec(detuning, intensity, aperture, efficiency, tau_pd)


def make_scenario(*, transition=CESIUM, atom_number=8e6, radius=350e-6,
                  detuning=-2.0 * math.pi * 50e9, intensity=FIG_INTENSITY,
                  efficiency=0.29, tau_pd=125e-6, wavepacket_width=44.5e-9,
                  bias_field=2.0e-6, sample_rate=1e5, pre_trigger=5e-3,
                  duration=25e-3, background_decay=math.inf, rin=0.0,
                  seed=0, initial_phase=0.0, aperture=None):
    probe = core.ProbeSpec(
        detuning, intensity,
        aperture if aperture is not None else core.optimal_aperture(radius),
        efficiency, tau_pd)
    lat = lattice.LatticeSpec(
        lattice.DetuningSign.from_detuning(detuning), wavepacket_width,
        transition.wavelength)
    return synth.Scenario(
        transition=transition, cloud=core.CloudSpec(atom_number, radius),
        probe=probe, lattice=lat, bias_field=bias_field,
        initial_phase=initial_phase, pre_trigger=pre_trigger,
        duration=duration, sample_rate=sample_rate,
        background_decay=background_decay, rin=rin, seed=seed)


def quiet_scenario(**kwargs):
    """Zero-amplitude scenario: blue detuning with perfect localization."""
    kwargs.setdefault("detuning", +2.0 * math.pi * 50e9)
    kwargs.setdefault("wavepacket_width", 0.0)
    return make_scenario(**kwargs)


def detuning_for_lattice_tau(tau_lattice, intensity=FIG_INTENSITY,
                             transition=CESIUM, wavepacket_width=44.5e-9):
    """Red detuning at which the standing-wave scattering time is tau_lattice."""
    beta = lattice.debye_waller(wavepacket_width, transition.wavelength)
    tau_single = tau_lattice * 2.0 * (1.0 + beta)
    ratio = math.sqrt(tau_single * transition.natural_linewidth
                      * (intensity / transition.saturation_intensity) / 12.0)
    return -ratio * transition.natural_linewidth
