"""Standing-wave signal and scattering corrections."""

import math

import numpy as np
import pytest

from faraday_probe import lattice
from faraday_probe.errors import ValidationError
from faraday_probe.lattice import DetuningSign

LAMBDA = 852e-9
BELOW = DetuningSign.BELOW_RESONANCE
ABOVE = DetuningSign.ABOVE_RESONANCE


def test_detuning_sign_from_detuning():
    assert DetuningSign.from_detuning(-1.0) is BELOW
    assert DetuningSign.from_detuning(+1.0) is ABOVE
    with pytest.raises(ValidationError):
        DetuningSign.from_detuning(0.0)


class TestDebyeWaller:
    def test_perfect_localization(self):
        assert lattice.debye_waller(0.0, LAMBDA) == 1.0

    def test_delocalized_limit(self):
        assert lattice.debye_waller(1e-5, LAMBDA) < 1e-100

    def test_monotone_decreasing(self):
        widths = np.linspace(0.0, 200e-9, 40)
        betas = [lattice.debye_waller(w, LAMBDA) for w in widths]
        assert all(a > b for a, b in zip(betas, betas[1:]))

    def test_typical_width_anchor(self):
        assert lattice.debye_waller(44.5e-9, LAMBDA) == pytest.approx(0.65, abs=1e-3)
        # inverting beta = 0.65 lands back on ~44.5 nm
        width = math.sqrt(-math.log(0.65)) / (4 * math.pi / LAMBDA)
        assert width == pytest.approx(44.5e-9, rel=1e-4)


class TestBraggFactors:
    def test_perfect_localization_limits(self):
        assert lattice.bragg_signal_factor(BELOW, 1.0) == 2.0
        assert lattice.bragg_signal_factor(ABOVE, 1.0) == 0.0

    def test_signal_ratio_anchor(self):
        ratio = lattice.bragg_signal_factor(BELOW, 0.65) \
            / lattice.bragg_signal_factor(ABOVE, 0.65)
        assert ratio == pytest.approx(4.714285714285714, rel=1e-12)
        assert ratio == pytest.approx(4.71, abs=0.01)

    def test_sides_are_complementary(self):
        for width in (0.0, 20e-9, 44.5e-9, 120e-9):
            beta = lattice.debye_waller(width, LAMBDA)
            total = lattice.bragg_signal_factor(BELOW, beta) \
                + lattice.bragg_signal_factor(ABOVE, beta)
            assert total == pytest.approx(2.0, rel=1e-14)

    def test_beta_domain(self):
        with pytest.raises(ValidationError):
            lattice.bragg_signal_factor(BELOW, 1.5)


class TestScatteringFactor:
    def test_limits(self):
        assert lattice.lattice_scattering_factor(BELOW, 1.0) == 4.0
        assert lattice.lattice_scattering_factor(ABOVE, 1.0) == 0.0

    def test_delocalized_sees_mean_intensity(self):
        assert lattice.lattice_scattering_factor(BELOW, 0.0) == 2.0
        assert lattice.lattice_scattering_factor(ABOVE, 0.0) == 2.0


class TestPositionSignal:
    def test_antinode_node_midpoint(self):
        assert lattice.position_signal(0.0, LAMBDA) == pytest.approx(2.0)
        assert lattice.position_signal(LAMBDA / 4, LAMBDA) == pytest.approx(0.0, abs=1e-12)
        assert lattice.position_signal(LAMBDA / 8, LAMBDA) == pytest.approx(1.0, rel=1e-12)

    def test_even_and_periodic(self):
        for x in (0.1e-9, 37e-9, 200e-9):
            assert lattice.position_signal(x, LAMBDA) \
                == pytest.approx(lattice.position_signal(-x, LAMBDA), rel=1e-12)
            assert lattice.position_signal(x + LAMBDA / 2, LAMBDA) \
                == pytest.approx(lattice.position_signal(x, LAMBDA), rel=1e-9)

    def test_mean_over_period_is_one(self):
        grid = np.linspace(0.0, LAMBDA / 2, 10001)[:-1]
        mean = np.mean([lattice.position_signal(x, LAMBDA) for x in grid])
        assert mean == pytest.approx(1.0, abs=1e-9)

    def test_bounded(self):
        values = [lattice.position_signal(x, LAMBDA)
                  for x in np.linspace(-LAMBDA, LAMBDA, 1000)]
        assert min(values) >= 0.0 and max(values) <= 2.0


class TestWavepacketAverage:
    def test_point_atom_limits(self):
        assert lattice.wavepacket_averaged_signal(BELOW, 0.0, LAMBDA) == 2.0
        assert lattice.wavepacket_averaged_signal(ABOVE, 0.0, LAMBDA) \
            == pytest.approx(0.0, abs=1e-12)

    def test_matches_closed_form(self):
        for width in (5e-9, 20e-9, 44.5e-9, 80e-9, 150e-9):
            beta = lattice.debye_waller(width, LAMBDA)
            for sign in (BELOW, ABOVE):
                averaged = lattice.wavepacket_averaged_signal(sign, width, LAMBDA)
                closed = lattice.bragg_signal_factor(sign, beta)
                assert abs(averaged - closed) <= 1e-8 * max(closed, 1e-3)

    def test_typical_width_anchor(self):
        value = lattice.wavepacket_averaged_signal(BELOW, 44.5e-9, LAMBDA)
        assert value == pytest.approx(1.65, abs=2e-3)


class TestBetaFromRatio:
    def test_anchor(self):
        assert lattice.beta_from_ratio(4.7) == pytest.approx(0.649, abs=5e-4)

    def test_limits(self):
        assert lattice.beta_from_ratio(1.0 + 1e-9) == pytest.approx(0.0, abs=1e-9)
        assert lattice.beta_from_ratio(1e12) == pytest.approx(1.0, abs=1e-11)

    def test_round_trip(self):
        for beta in np.linspace(0.0, 0.999, 41)[1:]:
            ratio = lattice.bragg_signal_factor(BELOW, beta) \
                / lattice.bragg_signal_factor(ABOVE, beta)
            assert abs(lattice.beta_from_ratio(ratio) - beta) < 1e-12

    def test_domain(self):
        with pytest.raises(ValidationError):
            lattice.beta_from_ratio(1.0)
        with pytest.raises(ValidationError):
            lattice.beta_from_ratio(0.5)


def test_lattice_spec_derived_fields():
    spec = lattice.LatticeSpec(BELOW, 44.5e-9, LAMBDA)
    assert spec.debye_waller_factor == pytest.approx(0.65, abs=1e-3)
    assert spec.signal_factor == pytest.approx(1.65, abs=1e-3)
    assert spec.scattering_factor == pytest.approx(3.30, abs=2e-3)
    with pytest.raises(ValidationError):
        lattice.LatticeSpec(BELOW, -1e-9, LAMBDA)
