"""Configuration handling for the command-line tools.

Configs are TOML files with units spelled out in the key names (detuning_ghz,
radius_um, ...); conversion to SI happens here, once, at the boundary.  Every
run can echo its fully resolved configuration (all defaults materialized) as
a manifest, from which the run is reproducible.
"""

from __future__ import annotations

import math
import os
import sys
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from . import core, lattice, synth
from .errors import ValidationError

__all__ = [
    "apply_overrides",
    "build_filter",
    "build_scenario",
    "default_seed",
    "load_config",
    "manifest_toml",
    "preset_names",
    "preset_path",
    "resolve_config",
]

_REQUIRED = object()

# section -> key -> (type, default); _REQUIRED means the config must set it.
_SCHEMA = {
    "transition": {
        "wavelength_nm": (float, _REQUIRED),
        "linewidth_mhz": (float, _REQUIRED),   # natural linewidth / 2 pi
        "total_spin": (float, _REQUIRED),
        "lande_gf": (float, _REQUIRED),
    },
    "cloud": {
        "atom_number": (float, _REQUIRED),
        "radius_um": (float, _REQUIRED),
    },
    "probe": {
        "detuning_ghz": (float, _REQUIRED),    # ordinary frequency, signed
        "intensity_w_m2": (float, _REQUIRED),
        "efficiency": (float, _REQUIRED),
        "aperture_radius_um": (float, None),   # None -> optimal aperture
        "detector_bandwidth_khz": (float, None),
        "detector_time_constant_us": (float, None),
    },
    "lattice": {
        "wavepacket_width_nm": (float, _REQUIRED),
    },
    "field": {
        "bias_mgauss": (float, _REQUIRED),
    },
    "trace": {
        "initial_phase_rad": (float, 0.0),
        "pre_trigger_ms": (float, 5.0),
        "duration_ms": (float, 25.0),
        "sample_rate_khz": (float, 100.0),
        "background_decay_ms": (float, math.inf),
        "rin": (float, 0.0),
        "seed": (int, None),                   # None -> FARADAY_SEED or 0
    },
    "filter": {
        "low_cut_khz": (float, 2.0),
        "high_cut_khz": (float, 22.0),
        "order": (int, 4),
    },
    "analysis": {
        "signal_correction": (float, 1.0),
        "reference_snr": (float, None),
        "reference_eta": (float, None),
        "note": (str, None),
    },
    "sweep": {
        "parameter": (str, None),
        "values": (list, None),
        "log_range": (list, None),             # [lo, hi, n]
        "lin_range": (list, None),             # [lo, hi, n]
        "seeds_per_point": (int, 1),
    },
}


def default_seed():
    """Seed from the FARADAY_SEED environment variable, else 0."""
    raw = os.environ.get("FARADAY_SEED", "").strip()
    if not raw:
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise ValidationError(f"FARADAY_SEED must be an integer, got {raw!r}")
    if not 0 <= seed < 2**64:
        raise ValidationError("FARADAY_SEED must be an unsigned 64-bit integer")
    return seed


def load_config(path):
    """Parse a TOML config file into a raw dict."""
    try:
        with open(path, "rb") as handle:
            return _toml.load(handle)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except _toml.TOMLDecodeError as exc:
        raise ValidationError(f"config {path}: {exc}")


def resolve_config(raw, seed=None):
    """Validate a raw config against the schema and materialize defaults.

    Returns a nested dict with every key present.  Problems are collected
    and reported together, one per offending field.
    """
    problems = []
    resolved = {}
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a table")
    for section in raw:
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
    for section, keys in _SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            problems.append(f"[{section}] must be a table")
            given = {}
        out = {}
        for key in given:
            if key not in keys:
                problems.append(f"{section}.{key}: unknown key")
        for key, (kind, default) in keys.items():
            if key in given:
                value = given[key]
                if kind is float and isinstance(value, int) and not isinstance(value, bool):
                    value = float(value)
                if kind is int and isinstance(value, bool):
                    problems.append(f"{section}.{key}: expected integer")
                    continue
                if not isinstance(value, kind):
                    problems.append(
                        f"{section}.{key}: expected {kind.__name__}, "
                        f"got {type(value).__name__}")
                    continue
                out[key] = value
            elif default is _REQUIRED:
                problems.append(f"{section}.{key}: required key missing")
            else:
                out[key] = default
        resolved[section] = out
    if problems:
        raise ValidationError(problems)

    probe = resolved["probe"]
    has_bw = probe["detector_bandwidth_khz"] is not None
    has_tc = probe["detector_time_constant_us"] is not None
    if has_bw == has_tc:
        raise ValidationError(
            "probe: set exactly one of detector_bandwidth_khz and "
            "detector_time_constant_us")
    if resolved["trace"]["seed"] is None:
        resolved["trace"]["seed"] = seed if seed is not None else default_seed()
    return resolved


def apply_overrides(resolved, overrides):
    """Apply dotted-path overrides (e.g. {'probe.detuning_ghz': -23.0})."""
    for path, value in overrides.items():
        section, _, key = path.partition(".")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ValidationError(f"unknown parameter path {path!r}")
        kind = _SCHEMA[section][key][0]
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            raise ValidationError(
                f"{path}: expected {kind.__name__}, got {type(value).__name__}")
        resolved[section][key] = value
    return resolved


def build_scenario(resolved):
    """Assemble a Scenario (SI units) from a resolved config."""
    t = resolved["transition"]
    transition = core.TransitionSpec(
        wavelength=t["wavelength_nm"] * 1e-9,
        natural_linewidth=2.0 * math.pi * t["linewidth_mhz"] * 1e6,
        total_spin=t["total_spin"],
        lande_gf=t["lande_gf"],
    )
    c = resolved["cloud"]
    cloud = core.CloudSpec(atom_number=c["atom_number"],
                           radius=c["radius_um"] * 1e-6)
    p = resolved["probe"]
    if p["aperture_radius_um"] is not None:
        aperture = p["aperture_radius_um"] * 1e-6
    else:
        aperture = core.optimal_aperture(cloud.radius)
    if p["detector_time_constant_us"] is not None:
        tau_pd = p["detector_time_constant_us"] * 1e-6
    else:
        tau_pd = synth.effective_tau_pd(p["detector_bandwidth_khz"] * 1e3)
    detuning = 2.0 * math.pi * p["detuning_ghz"] * 1e9
    probe = core.ProbeSpec(
        detuning=detuning,
        single_beam_intensity=p["intensity_w_m2"],
        aperture_radius=aperture,
        efficiency=p["efficiency"],
        detector_time_constant=tau_pd,
    )
    lat = lattice.LatticeSpec(
        detuning_sign=lattice.DetuningSign.from_detuning(detuning),
        wavepacket_width=resolved["lattice"]["wavepacket_width_nm"] * 1e-9,
        wavelength=transition.wavelength,
    )
    tr = resolved["trace"]
    return synth.Scenario(
        transition=transition,
        cloud=cloud,
        probe=probe,
        lattice=lat,
        bias_field=resolved["field"]["bias_mgauss"] * 1e-7,   # 1 mG = 1e-7 T
        initial_phase=tr["initial_phase_rad"],
        pre_trigger=tr["pre_trigger_ms"] * 1e-3,
        duration=tr["duration_ms"] * 1e-3,
        sample_rate=tr["sample_rate_khz"] * 1e3,
        background_decay=tr["background_decay_ms"] * 1e-3,
        rin=tr["rin"],
        seed=tr["seed"],
    )


def build_filter(resolved):
    f = resolved["filter"]
    return synth.FilterSpec(low_cut=f["low_cut_khz"] * 1e3,
                            high_cut=f["high_cut_khz"] * 1e3,
                            order=f["order"])


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)   # repr round-trips; 'inf' is valid TOML
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ValidationError(f"cannot serialize {type(value).__name__} to TOML")


def manifest_toml(resolved):
    """Serialize a resolved config back to TOML (the run manifest).

    None-valued optional keys are omitted; everything else, defaults
    included, is written out so the run is reproducible from the manifest
    alone.
    """
    lines = []
    for section in _SCHEMA:
        body = [
            f"{key} = {_toml_value(value)}"
            for key, value in resolved.get(section, {}).items()
            if value is not None
        ]
        if body:
            lines.append(f"[{section}]")
            lines.extend(body)
            lines.append("")
    return "\n".join(lines)


def preset_names():
    root = resources.files("faraday_probe").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name):
    """Filesystem path of a packaged preset config."""
    path = resources.files("faraday_probe").joinpath("presets", f"{name}.toml")
    if not path.is_file():
        raise ValidationError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path
