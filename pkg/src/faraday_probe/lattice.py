"""Standing-wave corrections to the Faraday signal.

In a 1D lin-parallel-lin lattice the probed atoms sit at the antinodes
(detuning below resonance) or nodes (above resonance) of the standing wave.
Coherent scattering off the ordered sample interferes with the forward
probe field, multiplying the traveling-wave Faraday signal by 1 + beta or
1 - beta, where beta = exp(-dk^2 dz^2) is the localization (Debye-Waller)
factor for momentum transfer dk = 2k.  The photon scattering rate picks up
the factor 2(1 +- beta) of the local standing-wave intensity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.integrate import quad

from .errors import ValidationError

__all__ = [
    "DetuningSign",
    "LatticeSpec",
    "beta_from_ratio",
    "bragg_signal_factor",
    "debye_waller",
    "lattice_scattering_factor",
    "position_signal",
    "wavepacket_averaged_signal",
]


class DetuningSign(enum.Enum):
    """Which side of resonance the lattice is tuned to.

    Below resonance traps atoms at antinodes, above resonance at nodes.
    """

    BELOW_RESONANCE = "below"
    ABOVE_RESONANCE = "above"

    @classmethod
    def from_detuning(cls, detuning):
        if detuning == 0:
            raise ValidationError("detuning must be nonzero")
        return cls.BELOW_RESONANCE if detuning < 0 else cls.ABOVE_RESONANCE


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice side of resonance and atomic localization.

    ``wavepacket_width`` is the width parameter dz entering
    beta = exp(-(2k)^2 dz^2); the wavelength is shared with the probe
    transition.
    """

    detuning_sign: DetuningSign
    wavepacket_width: float   # dz, m
    wavelength: float         # m

    def __post_init__(self):
        problems = []
        if self.wavepacket_width < 0:
            problems.append("wavepacket_width must be >= 0")
        if not self.wavelength > 0:
            problems.append("wavelength must be > 0")
        if problems:
            raise ValidationError(problems)

    @property
    def debye_waller_factor(self):
        return debye_waller(self.wavepacket_width, self.wavelength)

    @property
    def signal_factor(self):
        return bragg_signal_factor(self.detuning_sign, self.debye_waller_factor)

    @property
    def scattering_factor(self):
        return lattice_scattering_factor(self.detuning_sign, self.debye_waller_factor)


def debye_waller(wavepacket_width, wavelength):
    """Localization factor beta = exp(-(2k)^2 dz^2), in (0, 1]."""
    if wavepacket_width < 0:
        raise ValidationError("wavepacket_width must be >= 0")
    if not wavelength > 0:
        raise ValidationError("wavelength must be > 0")
    dk = 4.0 * math.pi / wavelength
    return math.exp(-(dk * wavepacket_width) ** 2)


def _check_beta(beta):
    if not 0 <= beta <= 1:
        raise ValidationError("beta must be in [0, 1]")


def bragg_signal_factor(sign, beta):
    """Faraday-signal multiplier: 1 + beta at antinodes, 1 - beta at nodes."""
    _check_beta(beta)
    if sign is DetuningSign.BELOW_RESONANCE:
        return 1.0 + beta
    return 1.0 - beta


def lattice_scattering_factor(sign, beta):
    """Scattering-rate multiplier 2(1 +- beta) relative to a single beam.

    The rate follows the mean standing-wave intensity over the wavepacket:
    x4 for perfect antinode localization, 0 at perfect nodes, x2 for
    completely delocalized atoms (incoherent sum of the two beams).
    """
    _check_beta(beta)
    return 2.0 * bragg_signal_factor(sign, beta)


def position_signal(x, wavelength):
    """Relative Faraday signal of a point atom at lattice position x.

    1 + cos(2kx), in [0, 2]; even in x with period lambda/2; x = 0 is an
    antinode.  Averages to 1 over a period.
    """
    if not wavelength > 0:
        raise ValidationError("wavelength must be > 0")
    return 1.0 + math.cos(4.0 * math.pi * x / wavelength)


def wavepacket_averaged_signal(sign, wavepacket_width, wavelength):
    """Gaussian-wavepacket average of :func:`position_signal`.

    The wavepacket is centered on an antinode (below resonance) or node
    (above) and has the unique Gaussian width for which
    <cos(2kx)> = exp(-(2k)^2 dz^2), i.e. variance 2 dz^2.  Evaluated by
    quadrature; agrees with 1 +- beta analytically.
    """
    if wavepacket_width < 0:
        raise ValidationError("wavepacket_width must be >= 0")
    if not wavelength > 0:
        raise ValidationError("wavelength must be > 0")
    center = 0.0 if sign is DetuningSign.BELOW_RESONANCE else wavelength / 4.0
    if wavepacket_width == 0:
        return position_signal(center, wavelength)
    sigma = math.sqrt(2.0) * wavepacket_width

    def integrand(s):
        x = center + sigma * s
        return (math.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)
                * position_signal(x, wavelength))

    value, _ = quad(integrand, -10.0, 10.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


def beta_from_ratio(ratio):
    """Invert the below/above signal ratio (1+beta)/(1-beta) for beta.

    beta = (R - 1)/(R + 1); requires R > 1 (the antinode signal always
    exceeds the node signal).
    """
    if not ratio > 1:
        raise ValidationError("signal ratio must be > 1")
    return (ratio - 1.0) / (ratio + 1.0)
