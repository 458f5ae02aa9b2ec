"""Bundled presets and the layered run configuration.

A run configuration is a plain dict. Values come from, in increasing
priority, the built-in defaults below, a JSON config file, and explicit
command-line flags.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict

from .geometry import TCellParams, UnitCellGeometry, load_geometry, make_t_cell
from .materials import PRESETS as MATERIAL_PRESETS
from .resonator import PAPER_BEAM, BeamModel

TCELL_CAVEAT = (
    "paper-tcell dimensions are illustrative: chosen to reproduce the 65 nm tip gap and "
    "772 nm alignment displacement, not the device's design values"
)

BEAM_PRESETS = {"paper-beam": PAPER_BEAM}
GEOMETRY_PRESETS = {"paper-tcell": TCellParams()}

DEFAULTS = {
    "material": "paper-silicon",
    "material_electrode": None,
    "geometry": "paper-tcell",
    "temperature_K": 0.0,
    "seed": 0,
    "threads": 1,
    "out": "out",
    "force_curve": {
        "mode": "Combined",
        "d_start_nm": 0.0,
        "d_stop_nm": 1100.0,
        "d_step_nm": 5.0,
        "resolution_nm": 1.0,
        "angle_threshold_deg": 45.0,
        "band": False,
        "band_offset_nm": 5.0,
    },
    "beta": {
        "d_start_nm": 550.0,
        "d_stop_nm": 950.0,
        "d_step_nm": 10.0,
        "spacing_nm": 5.0,
        "V_ref": 0.1,
        "richardson": False,
    },
    "beam": "paper-beam",
    "layout": {"units": 31, "pitch_nm": 2000.0, "weight_rule": "amplitude"},
    "calibration": {
        "grid_csv": None,
        "beta_csv": None,
        "casimir_csv": None,
        "synthetic": "paper",
        "noise_sigma": None,  # None: paper-scale
        "v_offset": 0.0,
        "d_l_err_nm": 14.0,
    },
}

SYNTHETIC_PRESETS = {
    "paper": {
        "alpha_nm_per_V2": 5.48,
        "k_cal": 1.07e-6,
        "v0_start_V": -0.016,
        "v0_stop_V": -0.058,
        "d_start_nm": 560.0,
        "d_stop_nm": 940.0,
        "d_step_nm": 10.0,
        "v_e_min": -0.3,
        "v_e_max": 0.3,
        "v_e_points": 21,
    },
}


class ConfigError(ValueError):
    """Configuration cannot be resolved."""


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``None`` in ``override`` leaves the base value."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        elif v is not None or k not in out:
            out[k] = v
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
    return data


def resolve_config(file_cfg: dict, flags: dict) -> dict:
    """Defaults, then the config file, then flags."""
    return merge(merge(DEFAULTS, file_cfg), flags)


def resolve_material(ref):
    from .materials import load_material, material_from_dict

    if isinstance(ref, dict):
        return material_from_dict(ref)
    if ref in MATERIAL_PRESETS:
        return MATERIAL_PRESETS[ref]
    try:
        with open(ref, encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise ConfigError(f"unknown material {ref!r}: not a preset ({sorted(MATERIAL_PRESETS)}) "
                          "or a readable file") from None
    try:
        return load_material(text)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"material file {ref}: {exc}") from None


def resolve_geometry(ref) -> UnitCellGeometry:
    """Preset name, geometry file path, or ``{"tcell": {name_nm: value}}``."""
    if isinstance(ref, dict):
        raw = ref.get("tcell", {})
        kwargs = {}
        for k, v in raw.items():
            if k == "arc_segments":
                kwargs[k] = int(v)
            elif k.endswith("_nm"):
                kwargs[k[:-3]] = float(v) * 1e-9
            else:
                raise ConfigError(f"unknown tcell key {k!r}")
        try:
            return make_t_cell(TCellParams(**kwargs))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
    if ref in GEOMETRY_PRESETS:
        return make_t_cell(GEOMETRY_PRESETS[ref])
    try:
        with open(ref, encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise ConfigError(f"geometry {ref!r}: not a preset ({sorted(GEOMETRY_PRESETS)}) "
                          "or a readable file") from None
    return load_geometry(text)


def resolve_beam(ref) -> BeamModel:
    if isinstance(ref, dict):
        base = asdict(PAPER_BEAM)
        unknown = set(ref) - set(base)
        if unknown:
            raise ConfigError(f"unknown beam keys {sorted(unknown)}")
        base.update(ref)
        return BeamModel(**base)
    if ref in BEAM_PRESETS:
        return BEAM_PRESETS[ref]
    raise ConfigError(f"unknown beam preset {ref!r}; known: {sorted(BEAM_PRESETS)}")
