"""Configuration handling, manifests, presets, and CLI contracts."""

import math
import sys

import numpy as np
import pytest

if sys.version_info >= (3, 11):
    import tomllib as toml_reader
else:
    import tomli as toml_reader

from faraday_probe import analysis, cli, config, core, synth
from faraday_probe.errors import ValidationError

MINIMAL = """
[transition]
wavelength_nm = 852.0
linewidth_mhz = 5.22
total_spin = 4.0
lande_gf = 0.25

[cloud]
atom_number = 1.0e8
radius_um = 750.0

[probe]
detuning_ghz = -50.0
intensity_w_m2 = 6.0e4
efficiency = 0.29
detector_bandwidth_khz = 2.0

[lattice]
wavepacket_width_nm = 44.5

[field]
bias_mgauss = 30.0

[trace]
sample_rate_khz = 125.0
"""


def write_config(tmp_path, text=MINIMAL, name="config.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfigResolution:
    def test_defaults_materialized(self, tmp_path):
        resolved = config.resolve_config(
            config.load_config(write_config(tmp_path)))
        assert resolved["trace"]["duration_ms"] == 25.0
        assert resolved["filter"]["low_cut_khz"] == 2.0
        assert resolved["analysis"]["signal_correction"] == 1.0
        assert resolved["trace"]["seed"] == 0
        assert resolved["trace"]["background_decay_ms"] == math.inf

    def test_unknown_key_and_section_reported(self, tmp_path):
        text = MINIMAL + "\n[mystery]\nx = 1\n"
        text = text.replace("bias_mgauss = 30.0", "bias_mgauss = 30.0\ntypo = 1")
        with pytest.raises(ValidationError) as err:
            config.resolve_config(config.load_config(write_config(tmp_path, text)))
        joined = " ".join(err.value.problems)
        assert "[mystery]" in joined
        assert "field.typo" in joined

    def test_missing_required_lists_field(self, tmp_path):
        text = MINIMAL.replace("atom_number = 1.0e8\n", "")
        with pytest.raises(ValidationError, match="cloud.atom_number"):
            config.resolve_config(config.load_config(write_config(tmp_path, text)))

    def test_detector_keys_exclusive(self, tmp_path):
        text = MINIMAL.replace("detector_bandwidth_khz = 2.0",
                               "detector_bandwidth_khz = 2.0\n"
                               "detector_time_constant_us = 125.0")
        with pytest.raises(ValidationError, match="exactly one"):
            config.resolve_config(config.load_config(write_config(tmp_path, text)))

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FARADAY_SEED", "31415")
        resolved = config.resolve_config(
            config.load_config(write_config(tmp_path)))
        assert resolved["trace"]["seed"] == 31415

    def test_override_unknown_path_rejected(self, tmp_path):
        resolved = config.resolve_config(
            config.load_config(write_config(tmp_path)))
        with pytest.raises(ValidationError, match="unknown parameter path"):
            config.apply_overrides(resolved, {"probe.nonsense": 1.0})

    def test_manifest_round_trips(self, tmp_path):
        resolved = config.resolve_config(
            config.load_config(write_config(tmp_path)))
        manifest = config.manifest_toml(resolved)
        reparsed = config.resolve_config(toml_reader.loads(manifest))
        assert reparsed == resolved


class TestScenarioBuild:
    def test_default_preset_anchors(self):
        resolved = config.resolve_config(
            config.load_config(config.preset_path("cs_default")))
        scenario = config.build_scenario(resolved)
        depth = core.resonant_optical_depth(scenario.transition, scenario.cloud)
        assert depth == pytest.approx(9.8, rel=0.01)
        assert scenario.probe.detector_time_constant == pytest.approx(125e-6)
        assert scenario.probe.aperture_radius == pytest.approx(
            core.optimal_aperture(scenario.cloud.radius), rel=1e-12)
        assert scenario.larmor_omega / (2 * math.pi) == pytest.approx(10497.2,
                                                                      rel=1e-4)

    def test_units_converted_at_boundary(self, tmp_path):
        resolved = config.resolve_config(
            config.load_config(write_config(tmp_path)))
        scenario = config.build_scenario(resolved)
        assert scenario.transition.wavelength == pytest.approx(852e-9)
        assert scenario.probe.detuning == pytest.approx(-2 * math.pi * 50e9)
        assert scenario.bias_field == pytest.approx(3.0e-6)
        assert scenario.sample_rate == pytest.approx(125e3)

    def test_preset_listing(self):
        names = config.preset_names()
        for expected in ("cs_default", "fig2", "fig3", "fig4", "fig5a", "fig5b"):
            assert expected in names
        with pytest.raises(ValidationError, match="unknown preset"):
            config.preset_path("nope")


class TestPredictCommand:
    def test_reports_quantities(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        code = cli.main(["predict", "--preset", "cs_default"])
        out = capsys.readouterr().out
        assert code == 0
        for key in ("diff_power_w", "shot_noise_w", "snr_detector",
                    "optical_depth", "eta", "optimal_aperture_m",
                    "tau_s_lattice_s", "larmor_frequency_hz"):
            assert key in out
        assert (tmp_path / "predict.manifest.toml").exists()

    def test_fig5a_reports_eta_next_to_reference(self, tmp_path, monkeypatch,
                                                 capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["predict", "--preset", "fig5a"]) == 0
        out = capsys.readouterr().out
        eta = float([l for l in out.splitlines()
                     if l.startswith("eta = ")][0].split("=")[1])
        assert eta == pytest.approx(0.0546, abs=0.002)
        assert "reference_eta = 0.035" in out
        assert "note:" in out

    def test_rejected_cloud_exits_2(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        bad = write_config(tmp_path, MINIMAL.replace("atom_number = 1.0e8",
                                                     "atom_number = 0.0"))
        assert cli.main(["predict", "--config", str(bad)]) == 2
        assert "atom_number" in capsys.readouterr().err


class TestSynthAnalyze:
    def test_synth_is_byte_deterministic(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(["synth", "--preset", "fig2", "--seed", "5",
                         "--out", str(first)]) == 0
        assert cli.main(["synth", "--preset", "fig2", "--seed", "5",
                         "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        different = tmp_path / "c.csv"
        assert cli.main(["synth", "--preset", "fig2", "--seed", "6",
                         "--out", str(different)]) == 0
        assert first.read_bytes() != different.read_bytes()

    def test_round_trip_recovers_larmor(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        trace_path = tmp_path / "trace.csv"
        assert cli.main(["synth", "--preset", "fig2", "--seed", "5",
                         "--out", str(trace_path)]) == 0
        fits_path = tmp_path / "fits.csv"
        assert cli.main(["analyze", str(trace_path),
                         "--out", str(fits_path)]) == 0
        lines = fits_path.read_text().splitlines()
        assert lines[0] == "# schema=1"
        assert lines[1] == "A_w,tau_s,omega_rad_s,phase_rad,residual_rms_w,converged"
        omega = float(lines[2].split(",")[2])
        scenario = config.build_scenario(config.resolve_config(
            config.load_config(config.preset_path("fig2"))))
        assert abs(omega / scenario.larmor_omega - 1) < 1e-3

    def test_malformed_trace_exits_3_with_line(self, tmp_path, monkeypatch,
                                               capsys):
        monkeypatch.chdir(tmp_path)
        trace_path = tmp_path / "trace.csv"
        assert cli.main(["synth", "--preset", "fig2",
                         "--out", str(trace_path)]) == 0
        lines = trace_path.read_text().splitlines()
        truncated = tmp_path / "broken.csv"
        truncated.write_text("\n".join(lines[:40]) + "\nbogus\n")
        assert cli.main(["analyze", str(truncated)]) == 3
        err = capsys.readouterr().err
        assert "line" in err


class TestSweepCommand:
    def test_unknown_parameter_exits_2(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["sweep", "--preset", "fig3", "--param",
                         "probe.made_up", "--values", "1.0"]) == 2
        assert "unknown parameter path" in capsys.readouterr().err

    def test_single_point_matches_predict(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["predict", "--preset", "cs_default"]) == 0
        predict_out = capsys.readouterr().out
        predicted = {}
        for line in predict_out.splitlines():
            if " = " in line:
                key, _, value = line.partition(" = ")
                try:
                    predicted[key] = float(value)
                except ValueError:
                    pass
        out_csv = tmp_path / "sweep.csv"
        assert cli.main(["sweep", "--preset", "cs_default", "--param",
                         "probe.detuning_ghz", "--values", "-50.0",
                         "--seeds-per-point", "1", "--seed", "3",
                         "--out", str(out_csv)]) == 0
        header, row = out_csv.read_text().splitlines()[1:3]
        columns = dict(zip(header.split(","), row.split(",")))
        assert float(columns["tau_s_single_s"]) == pytest.approx(
            predicted["tau_s_single_s"], rel=1e-4)
        assert float(columns["tau_s_lattice_s"]) == pytest.approx(
            predicted["tau_s_lattice_s"], rel=1e-4)
        assert float(columns["analytic_snr_detector"]) == pytest.approx(
            predicted["snr_detector"], rel=1e-4)
        assert float(columns["analytic_snr_filtered"]) == pytest.approx(
            predicted["snr_filtered"], rel=1e-4)

    def test_detuning_sweep_spans_two_decades(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        out_csv = tmp_path / "sweep.csv"
        # analytics only would do, but the sweep runs the full pipeline
        assert cli.main(["sweep", "--preset", "fig3", "--seeds-per-point", "1",
                         "--seed", "1", "--out", str(out_csv)]) == 0
        rows = [line.split(",") for line in
                out_csv.read_text().splitlines()[2:]]
        taus = [float(r[5]) for r in rows]
        assert max(taus) / min(taus) > 80.0

    def test_sweep_is_deterministic(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert cli.main(["sweep", "--preset", "cs_default", "--param",
                             "probe.detuning_ghz", "--values", "-40,-60",
                             "--seeds-per-point", "2", "--seed", "9",
                             "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestReproduceBundles:
    def test_fig2_amplitude_ratio(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "fig2"
        assert cli.main(["reproduce", "fig2", "--seed", "1",
                         "--out", str(out)]) == 0
        assert (out / "README.md").exists()
        summary = (out / "summary.csv").read_text().splitlines()
        header = summary[1].split(",")
        below = dict(zip(header, summary[2].split(",")))
        above = dict(zip(header, summary[3].split(",")))
        ratio = (float(below["fitted_amplitude_w"])
                 / float(above["fitted_amplitude_w"]))
        assert ratio == pytest.approx(4.714, rel=0.02)

    def test_fig3_scaling(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "fig3"
        assert cli.main(["reproduce", "fig3", "--seed", "2",
                         "--out", str(out)]) == 0
        slope_line = (out / "scaling_fit.csv").read_text().splitlines()[2]
        slope, _, inferred = (float(x) for x in slope_line.split(","))
        assert slope == pytest.approx(-0.5, abs=0.03)
        assert inferred == pytest.approx(1.7e6, rel=0.10)

    def test_fig4_damping_plateau(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "fig4"
        assert cli.main(["reproduce", "fig4", "--seed", "3",
                         "--out", str(out)]) == 0
        rows = [line.split(",") for line in
                (out / "damping_vs_tau.csv").read_text().splitlines()[2:]]
        tau_s = np.array([float(r[1]) for r in rows])
        model_tau = np.array([float(r[2]) for r in rows])
        fitted_tau = np.array([float(r[3]) for r in rows])
        order = np.argsort(tau_s)
        # fitted damping tracks the model decay and saturates near the
        # 5 ms background time instead of following tau_s
        assert np.all(np.abs(fitted_tau / model_tau - 1.0) < 0.25)
        assert fitted_tau[order][-1] < 5.5e-3
        assert tau_s[order][-1] > 4 * fitted_tau[order][-1]

    def test_fig5_reports(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "fig5"
        assert cli.main(["reproduce", "fig5", "--seed", "4",
                         "--out", str(out)]) == 0
        report = dict(
            line.split(",") for line in
            (out / "report_5a.csv").read_text().splitlines()[2:])
        corrected = float(report["analytic_snr_corrected"])
        reference = float(report["reference_snr"])
        assert reference / 2 <= corrected <= reference * 2
        assert float(report["eta"]) == pytest.approx(0.0546, abs=0.002)
        assert (out / "realtime_5b.csv").exists()
