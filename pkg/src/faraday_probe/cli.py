"""Command-line interface: predict | sweep | synth | analyze | reproduce.

Exit codes: 0 success, 2 configuration error, 3 data error.  Every run
writes a manifest with the fully resolved configuration next to its output,
so results are reproducible from the manifest alone.
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, config, core, synth
from .errors import DataError, ValidationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def derived_seed(base_seed, *key):
    """Deterministic per-task seed from the base seed and task indices."""
    sequence = np.random.SeedSequence((int(base_seed),) + tuple(int(k) for k in key))
    return int(sequence.generate_state(1, np.uint64)[0])


def _add_config_options(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="path to a TOML config file")
    group.add_argument("--preset", help="name of a packaged preset config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the base seed (default: config, then "
                             "FARADAY_SEED, then 0)")


def _load_resolved(args):
    path = args.config if args.config else config.preset_path(args.preset)
    resolved = config.resolve_config(config.load_config(path))
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        resolved["trace"]["seed"] = args.seed
    return resolved


def _write_manifest(resolved, out_path, default_name):
    if out_path:
        manifest = Path(str(out_path) + ".manifest.toml")
    else:
        manifest = Path(f"{default_name}.manifest.toml")
    manifest.write_text(config.manifest_toml(resolved))
    return manifest


def _window_arg(args):
    if args.window is None:
        return None
    t0, t1 = args.window
    return (t0, t1)


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def cmd_predict(args):
    resolved = _load_resolved(args)
    scenario = config.build_scenario(resolved)
    filter_spec = config.build_filter(resolved)

    warnings_list = core.regime_warnings(scenario.transition, scenario.probe,
                                         emit=False)
    tau_lat = scenario.lattice_scattering_time
    tau_pd = scenario.probe.detector_time_constant
    report = backaction = core.backaction_eta(
        scenario.transition, scenario.cloud, scenario.probe.efficiency,
        tau_pd, tau_lat)
    snr_detector = synth.analytic_snr(scenario)
    tau_pd_filtered = synth.filter_effective_tau_pd(filter_spec,
                                                    scenario.sample_rate)
    lines = [
        ("larmor_frequency_hz", scenario.larmor_omega / (2.0 * math.pi)),
        ("diff_power_w", core.differential_power(
            scenario.transition, scenario.cloud, scenario.probe,
            core.SpinState(1.0))),
        ("debye_waller_beta", scenario.lattice.debye_waller_factor),
        ("bragg_signal_factor", scenario.lattice.signal_factor),
        ("signal_amplitude_w", synth.predict_amplitude(scenario)),
        ("shot_noise_w", core.shot_noise_rms(scenario.probe,
                                             scenario.transition.photon_energy)),
        ("min_detectable_spin", 1.0 / snr_detector),
        ("snr_detector", snr_detector),
        ("snr_filtered", synth.analytic_snr(scenario, tau_pd_filtered)),
        ("scattering_rate_hz", core.scattering_rate(
            scenario.transition, scenario.probe.single_beam_intensity,
            scenario.probe.detuning)),
        ("tau_s_single_s", scenario.single_beam_scattering_time),
        ("tau_s_lattice_s", tau_lat),
        ("tau_eff_s", scenario.effective_decay),
        ("optical_depth", report.optical_depth),
        ("eta", backaction.eta),
        ("eta_inverse", 1.0 / backaction.eta),
        ("projection_noise", backaction.projection_noise),
        ("optimal_aperture_m", core.optimal_aperture(scenario.cloud.radius)),
        ("aperture_radius_m", scenario.probe.aperture_radius),
        ("tau_pd_detector_s", tau_pd),
        ("tau_pd_filtered_s", tau_pd_filtered),
    ]
    correction = resolved["analysis"]["signal_correction"]
    if correction != 1.0:
        lines.append(("signal_correction", correction))
        lines.append(("snr_detector_corrected", snr_detector * correction))
    for key, value in lines:
        print(f"{key} = {value:.6g}")
    for ref_key in ("reference_snr", "reference_eta"):
        ref = resolved["analysis"][ref_key]
        if ref is not None:
            print(f"{ref_key} = {ref:.6g}")
    note = resolved["analysis"]["note"]
    if note:
        print(f"note: {note}")
    for message in warnings_list:
        print(f"warning: {message}", file=sys.stderr)
    _write_manifest(resolved, args.out, "predict")
    if args.out:
        Path(args.out).write_text(
            "".join(f"{key} = {value!r}\n" for key, value in lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / analyze
# ---------------------------------------------------------------------------

def cmd_synth(args):
    resolved = _load_resolved(args)
    scenario = config.build_scenario(resolved)
    trace = synth.synthesize_trace(scenario)
    if args.filtered:
        trace = synth.bandpass_filter(trace, config.build_filter(resolved))
    synth.write_trace(trace, args.out)
    _write_manifest(resolved, args.out, "synth")
    print(f"wrote {len(trace.samples)} samples to {args.out}")
    return EXIT_OK


def cmd_analyze(args):
    window = _window_arg(args)
    rows = []
    for name in args.files:
        trace = synth.read_trace(name)
        fit = analysis.fit_damped_sinusoid(trace, window)
        line = (f"{name}: A = {fit.amplitude:.6g} W, tau = {fit.decay_time:.6g} s, "
                f"f = {fit.angular_frequency / (2.0 * math.pi):.6g} Hz, "
                f"phase = {fit.phase:.6g} rad, residual_rms = "
                f"{fit.residual_rms:.6g} W, converged = {fit.converged}")
        if trace.trigger_index >= 50:
            snr_value = fit.amplitude / analysis.rms_noise(trace)
            line += f", snr = {snr_value:.6g}"
        print(line)
        rows.append(fit)
    if args.out:
        with open(args.out, "w", newline="\n") as handle:
            handle.write("# schema=1\n")
            handle.write("A_w,tau_s,omega_rad_s,phase_rad,residual_rms_w,converged\n")
            for fit in rows:
                handle.write("%.17g,%.17g,%.17g,%.17g,%.17g,%s\n" % (
                    fit.amplitude, fit.decay_time, fit.angular_frequency,
                    fit.phase, fit.residual_rms,
                    "true" if fit.converged else "false"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_values(args, resolved):
    sweep = resolved["sweep"]
    parameter = args.param or sweep["parameter"]
    if not parameter:
        raise ValidationError("no sweep parameter: set --param or [sweep] parameter")
    if args.values:
        values = [float(v) for v in args.values.split(",")]
    elif args.log_range:
        lo, hi, count = args.log_range
        values = _log_values(lo, hi, int(count))
    elif args.lin_range:
        lo, hi, count = args.lin_range
        values = list(np.linspace(lo, hi, int(count)))
    elif sweep["values"] is not None:
        values = [float(v) for v in sweep["values"]]
    elif sweep["log_range"] is not None:
        lo, hi, count = sweep["log_range"]
        values = _log_values(lo, hi, int(count))
    elif sweep["lin_range"] is not None:
        lo, hi, count = sweep["lin_range"]
        values = list(np.linspace(lo, hi, int(count)))
    else:
        raise ValidationError("no sweep values: set --values or a range")
    if not values:
        raise ValidationError("sweep needs at least one value")
    seeds_per_point = args.seeds_per_point or sweep["seeds_per_point"]
    if seeds_per_point < 1:
        raise ValidationError("seeds_per_point must be >= 1")
    return parameter, values, seeds_per_point


def _log_values(lo, hi, count):
    if lo * hi <= 0:
        raise ValidationError("log range endpoints must share a nonzero sign")
    return list(np.geomspace(lo, hi, count))


def _sweep_task(task):
    """One (point, seed) evaluation; module-level for process pools."""
    resolved, parameter, value, point, rep, base_seed, window = task
    local = copy.deepcopy(resolved)
    config.apply_overrides(local, {parameter: value})
    scenario = config.build_scenario(local)
    scenario = replace(scenario, seed=derived_seed(base_seed, point, rep))
    filter_spec = config.build_filter(local)
    trace = synth.bandpass_filter(synth.synthesize_trace(scenario), filter_spec)
    tau_pd_filtered = synth.filter_effective_tau_pd(filter_spec,
                                                    scenario.sample_rate)
    measured = analysis.measure_snr(trace, window)
    return (point, rep, value, scenario.seed,
            scenario.single_beam_scattering_time,
            scenario.lattice_scattering_time,
            scenario.effective_decay,
            synth.analytic_snr(scenario),
            synth.analytic_snr(scenario, tau_pd_filtered),
            measured)


def cmd_sweep(args):
    resolved = _load_resolved(args)
    parameter, values, seeds_per_point = _sweep_values(args, resolved)
    config.apply_overrides(copy.deepcopy(resolved), {parameter: values[0]})
    base_seed = resolved["trace"]["seed"]
    window = _window_arg(args)

    tasks = [(resolved, parameter, value, i, j, base_seed, window)
             for i, value in enumerate(values)
             for j in range(seeds_per_point)]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(task) for task in tasks]
    results.sort(key=lambda row: (row[0], row[1]))

    header = (f"point,seed_index,{parameter},seed,tau_s_single_s,"
              "tau_s_lattice_s,tau_eff_s,analytic_snr_detector,"
              "analytic_snr_filtered,measured_snr")
    lines = ["# schema=1", header]
    for row in results:
        point, rep, value, seed, *numbers = row
        text = ",".join("%.17g" % x for x in numbers)
        lines.append(f"{point},{rep},{'%.17g' % value},{seed},{text}")
    out_text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(out_text)
        _write_manifest(resolved, args.out, "sweep")
        print(f"wrote {len(results)} rows to {args.out}")
    else:
        print(out_text, end="")
        _write_manifest(resolved, None, "sweep")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------

def _mean_filtered_traces(scenario, filter_spec, count, base_seed, tag):
    total = None
    for k in range(count):
        seeded = replace(scenario, seed=derived_seed(base_seed, tag, k))
        trace = synth.bandpass_filter(synth.synthesize_trace(seeded), filter_spec)
        total = trace.samples.copy() if total is None else total + trace.samples
    averaged = total / count
    return replace(trace, samples=averaged)


def _write_columns(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", newline="\n") as handle:
        handle.write("# schema=1\n")
        handle.write(header + "\n")
        for row in rows:
            handle.write(",".join("%.17g" % value for value in row) + "\n")


def _reproduce_fig2(out_dir, resolved, averages):
    base_seed = resolved["trace"]["seed"]
    filter_spec = config.build_filter(resolved)
    summary = []
    for index, sign in enumerate((-1.0, 1.0)):
        local = copy.deepcopy(resolved)
        magnitude = abs(local["probe"]["detuning_ghz"])
        config.apply_overrides(local, {"probe.detuning_ghz": sign * magnitude})
        scenario = config.build_scenario(local)
        scenario = replace(scenario, seed=derived_seed(base_seed, index))
        label = "below" if sign < 0 else "above"
        trace = synth.bandpass_filter(synth.synthesize_trace(scenario), filter_spec)
        _write_columns(out_dir / f"realtime_{label}.csv", "time_s,diff_power_w",
                       [trace.times(), trace.samples])
        mean_trace = _mean_filtered_traces(scenario, filter_spec, averages,
                                           base_seed, index)
        _write_columns(out_dir / f"averaged_{label}.csv", "time_s,diff_power_w",
                       [mean_trace.times(), mean_trace.samples])
        fit = analysis.fit_damped_sinusoid(mean_trace)
        summary.append((sign * magnitude, synth.signed_amplitude(scenario),
                        fit.amplitude, fit.decay_time))
    ratio = summary[0][2] / summary[1][2]
    _write_columns(out_dir / "summary.csv",
                   "detuning_ghz,model_amplitude_w,fitted_amplitude_w,fitted_tau_s",
                   [list(col) for col in zip(*summary)])
    return [
        "Time-domain precession signals on both sides of resonance.",
        "Expected shape: the signal changes sign between red and blue",
        "detuning, and the red-detuned (antinode) amplitude exceeds the",
        "blue-detuned (node) amplitude by (1+beta)/(1-beta) ~ 4.7 for",
        f"beta ~ 0.65.  Fitted amplitude ratio of the averages: {ratio:.3f}.",
    ]


def _scaling_points(resolved, window, seeds_per_point):
    """Measured SNR per sweep point of the configured detuning sweep.

    As in the measurement pipeline, the amplitude comes from fitting the
    ensemble-averaged signal while the RMS noise comes from the real-time
    (single-shot) pre-trigger segments.
    """
    base_seed = resolved["trace"]["seed"]
    values = [float(v) for v in resolved["sweep"]["values"]]
    filter_spec = config.build_filter(resolved)
    points = []
    detail = []
    for i, value in enumerate(values):
        local = copy.deepcopy(resolved)
        config.apply_overrides(local, {"probe.detuning_ghz": value})
        scenario = config.build_scenario(local)
        total = None
        rms_values = []
        for j in range(seeds_per_point):
            seeded = replace(scenario, seed=derived_seed(base_seed, i, j))
            trace = synth.bandpass_filter(synth.synthesize_trace(seeded),
                                          filter_spec)
            rms_values.append(analysis.rms_noise(trace))
            total = (trace.samples.copy() if total is None
                     else total + trace.samples)
        mean_trace = replace(trace, samples=total / seeds_per_point)
        fit = analysis.fit_damped_sinusoid(mean_trace, window)
        measured = fit.amplitude / float(np.mean(rms_values))
        tau_pd_filtered = synth.filter_effective_tau_pd(filter_spec,
                                                        scenario.sample_rate)
        points.append(analysis.ScalingPoint(
            tau_s=scenario.lattice_scattering_time,
            measured_snr=measured,
            detuning=scenario.probe.detuning))
        detail.append((value, scenario.lattice_scattering_time,
                       scenario.effective_decay, measured,
                       synth.analytic_snr(scenario, tau_pd_filtered),
                       fit.decay_time))
    return points, detail, scenario, tau_pd_filtered


def _reproduce_fig3(out_dir, resolved, seeds_per_point):
    window = (0.5e-3, resolved["trace"]["duration_ms"] * 1e-3)
    points, detail, scenario, tau_pd_filtered = _scaling_points(
        resolved, window, seeds_per_point)
    _write_columns(
        out_dir / "snr_vs_tau.csv",
        "detuning_ghz,tau_s_lattice_s,tau_eff_s,mean_measured_snr,"
        "analytic_snr_filtered,mean_fitted_tau_s",
        [list(col) for col in zip(*detail)])
    beta = scenario.lattice.debye_waller_factor
    correction = math.sqrt((1.0 + beta) / 2.0)
    fit = analysis.scaling_fit(
        points, wavelength=scenario.transition.wavelength,
        radius=scenario.cloud.radius, efficiency=scenario.probe.efficiency,
        tau_pd=tau_pd_filtered, correction=correction)
    with open(out_dir / "scaling_fit.csv", "w", newline="\n") as handle:
        handle.write("# schema=1\nslope,intercept,inferred_atom_number\n")
        handle.write("%.17g,%.17g,%.17g\n" % fit)
    return [
        "Measured SNR versus the mean time between photon scattering",
        "events, over roughly two decades of scattering time.  Expected",
        "shape: a straight line of slope -1/2 on log-log axes.  Fitted",
        f"slope: {fit.slope:.4f}; inferred atom number: {fit.inferred_n:.4g}",
        f"(dataset built with N = {scenario.cloud.atom_number:.4g}).",
    ]


def _reproduce_fig4(out_dir, resolved, seeds_per_point):
    window = (0.5e-3, resolved["trace"]["duration_ms"] * 1e-3)
    _, detail, scenario, _ = _scaling_points(resolved, window, seeds_per_point)
    _write_columns(
        out_dir / "damping_vs_tau.csv",
        "detuning_ghz,tau_s_lattice_s,tau_eff_model_s,mean_fitted_tau_s",
        [[d[0] for d in detail], [d[1] for d in detail],
         [d[2] for d in detail], [d[5] for d in detail]])
    background = scenario.background_decay
    return [
        "Fitted damping time versus the photon scattering time.  Expected",
        "shape: tau ~ tau_s for fast scattering, then a plateau at the",
        f"background dephasing time ({background * 1e3:.3g} ms) once photon",
        "scattering is no longer the dominant decoherence channel.",
    ]


def _reproduce_fig5(out_dir, resolved_a, resolved_b):
    lines = [
        "Real-time precession signals for a large sample.  Expected shape:",
        "clean real-time Larmor oscillations with single-shot SNR of a few",
        "hundred; the analytic SNR (with the documented overall signal",
        "correction) should sit within a factor of two of the reference",
        "values recorded in the presets.",
    ]
    for tag, resolved in (("a", resolved_a), ("b", resolved_b)):
        scenario = config.build_scenario(resolved)
        filter_spec = config.build_filter(resolved)
        trace = synth.bandpass_filter(synth.synthesize_trace(scenario),
                                      filter_spec)
        _write_columns(out_dir / f"realtime_5{tag}.csv", "time_s,diff_power_w",
                       [trace.times(), trace.samples])
        measured = analysis.measure_snr(trace)
        tau_lat = scenario.lattice_scattering_time
        backaction = core.backaction_eta(
            scenario.transition, scenario.cloud, scenario.probe.efficiency,
            scenario.probe.detector_time_constant, tau_lat)
        correction = resolved["analysis"]["signal_correction"]
        snr_detector = synth.analytic_snr(scenario)
        rows = [
            ("analytic_snr_detector", snr_detector),
            ("analytic_snr_corrected", snr_detector * correction),
            ("measured_snr_filtered", measured),
            ("tau_s_lattice_s", tau_lat),
            ("optical_depth", backaction.optical_depth),
            ("eta", backaction.eta),
            ("eta_inverse", 1.0 / backaction.eta),
        ]
        for ref_key in ("reference_snr", "reference_eta"):
            ref = resolved["analysis"][ref_key]
            if ref is not None:
                rows.append((ref_key, ref))
        with open(out_dir / f"report_5{tag}.csv", "w", newline="\n") as handle:
            handle.write("# schema=1\nquantity,value\n")
            for key, value in rows:
                handle.write("%s,%.17g\n" % (key, value))
        lines.append(f"Case 5{tag}: analytic SNR {snr_detector:.4g} "
                     f"(corrected {snr_detector * correction:.4g}), eta "
                     f"{backaction.eta:.4g}.")
    return lines


def cmd_reproduce(args):
    out_dir = Path(args.out or f"reproduce_{args.figure}")
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed

    def load(preset):
        resolved = config.resolve_config(config.load_config(config.preset_path(preset)))
        if seed is not None:
            resolved["trace"]["seed"] = seed
        return resolved

    if args.figure == "fig2":
        resolved = load("fig2")
        notes = _reproduce_fig2(out_dir, resolved, args.averages)
        (out_dir / "fig2.manifest.toml").write_text(config.manifest_toml(resolved))
    elif args.figure == "fig3":
        resolved = load("fig3")
        notes = _reproduce_fig3(out_dir, resolved,
                                args.seeds_per_point
                                or resolved["sweep"]["seeds_per_point"])
        (out_dir / "fig3.manifest.toml").write_text(config.manifest_toml(resolved))
    elif args.figure == "fig4":
        resolved = load("fig4")
        notes = _reproduce_fig4(out_dir, resolved,
                                args.seeds_per_point
                                or resolved["sweep"]["seeds_per_point"])
        (out_dir / "fig4.manifest.toml").write_text(config.manifest_toml(resolved))
    else:
        resolved_a, resolved_b = load("fig5a"), load("fig5b")
        notes = _reproduce_fig5(out_dir, resolved_a, resolved_b)
        (out_dir / "fig5a.manifest.toml").write_text(config.manifest_toml(resolved_a))
        (out_dir / "fig5b.manifest.toml").write_text(config.manifest_toml(resolved_b))
    (out_dir / "README.md").write_text(
        f"# Reproduction bundle: {args.figure}\n\n" + "\n".join(notes) + "\n")
    print(f"wrote bundle to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="faraday-probe",
        description="Model, synthesize and analyze continuous Faraday-rotation "
                    "measurements of precessing trapped-atom spins.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_predict = sub.add_parser("predict", help="closed-form point predictions")
    _add_config_options(p_predict)
    p_predict.add_argument("--out", help="also write the report to this file")
    p_predict.set_defaults(func=cmd_predict)

    p_synth = sub.add_parser("synth", help="write one synthetic trace as CSV")
    _add_config_options(p_synth)
    p_synth.add_argument("--out", required=True, help="trace CSV path")
    p_synth.add_argument("--filtered", action="store_true",
                         help="apply the configured band-pass before writing")
    p_synth.set_defaults(func=cmd_synth)

    p_analyze = sub.add_parser("analyze", help="fit damped sinusoids to traces")
    p_analyze.add_argument("files", nargs="+", help="trace CSV files")
    p_analyze.add_argument("--window", nargs=2, type=float, default=None,
                           metavar=("T0", "T1"),
                           help="fit window in trigger-relative seconds")
    p_analyze.add_argument("--out", help="fit-report CSV path")
    p_analyze.set_defaults(func=cmd_analyze)

    p_sweep = sub.add_parser("sweep", help="Monte Carlo parameter sweep")
    _add_config_options(p_sweep)
    p_sweep.add_argument("--param", help="config path to sweep, e.g. probe.detuning_ghz")
    p_sweep.add_argument("--values", help="comma-separated explicit values")
    p_sweep.add_argument("--log-range", nargs=3, type=float, default=None,
                         metavar=("LO", "HI", "N"), help="log-spaced range")
    p_sweep.add_argument("--lin-range", nargs=3, type=float, default=None,
                         metavar=("LO", "HI", "N"), help="linearly spaced range")
    p_sweep.add_argument("--seeds-per-point", type=int, default=None)
    p_sweep.add_argument("--window", nargs=2, type=float, default=None,
                         metavar=("T0", "T1"),
                         help="fit window in trigger-relative seconds")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", help="sweep CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_repro = sub.add_parser("reproduce",
                             help="emit a simulated figure-style CSV bundle")
    p_repro.add_argument("figure", choices=["fig2", "fig3", "fig4", "fig5"])
    p_repro.add_argument("--out", help="output directory")
    p_repro.add_argument("--seed", type=int, default=None)
    p_repro.add_argument("--averages", type=int, default=200,
                         help="ensemble size for averaged signals (fig2)")
    p_repro.add_argument("--seeds-per-point", type=int, default=None,
                         help="Monte Carlo repetitions per point (fig3/fig4)")
    p_repro.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
