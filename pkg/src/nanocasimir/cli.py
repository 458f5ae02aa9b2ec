"""Command-line front end: force curves, beta(d), calibration, inspection.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
Outputs are CSV and JSON only; each embeds the hash of the resolved
configuration and nothing time-dependent, so identical runs give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
import warnings

import numpy as np

from . import __version__
from .calibration import (
    CalibrationGrid, SyntheticTruth, fit_alpha_k, paper_scale_noise, synthesize_grid,
)
from .electrostatics import BetaCurve, beta_of_d
from .errors import GeometryError
from .geometry import (
    make_t_cell, min_separation, parallel_plates, save_geometry, tip_gap,
)
from .materials import CarrierTransport, drude_params_from_transport, epsilon_i_xi
from .pfa import CurveMode, ForceCurve, closest_approach_force, config_hash, force_curve, pfa_curve
from .presets import (
    GEOMETRY_PRESETS, SYNTHETIC_PRESETS, TCELL_CAVEAT, ConfigError, load_config,
    resolve_beam, resolve_config, resolve_geometry, resolve_material,
)
from .resonator import UnitLayout


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(p):
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap; results do not change")
    p.add_argument("--temperature-K", dest="temperature_K", type=float, default=argparse.SUPPRESS)


def _grid_flags(p):
    p.add_argument("--d-start-nm", type=float, default=argparse.SUPPRESS)
    p.add_argument("--d-stop-nm", type=float, default=argparse.SUPPRESS)
    p.add_argument("--d-step-nm", type=float, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nanocasimir", description=__doc__.splitlines()[0],
                epilog=f"Presets: paper-silicon, paper-beam, paper-tcell. Note: {TCELL_CAVEAT}.")
    p.add_argument("--version", action="version", version=__version__)
    _global_flags(p)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    fc = sub.add_parser("force-curve", help="PFA Casimir force and gradient per unit cell")
    _global_flags(fc)
    fc.add_argument("--material", default=argparse.SUPPRESS, help="preset name or material JSON file")
    fc.add_argument("--material-electrode", default=argparse.SUPPRESS)
    fc.add_argument("--geometry", default=argparse.SUPPRESS,
                    help=f"paper-tcell or a geometry JSON file ({TCELL_CAVEAT})")
    fc.add_argument("--mode", choices=[m.value for m in CurveMode], default=argparse.SUPPRESS)
    fc.add_argument("--band", action="store_true", default=argparse.SUPPRESS,
                    help="also run both polygons offset by +/- band_offset_nm")
    fc.add_argument("--band-offset-nm", type=float, default=argparse.SUPPRESS)
    fc.add_argument("--resolution-nm", type=float, default=argparse.SUPPRESS)
    _grid_flags(fc)

    cal = sub.add_parser("calibrate", help="alpha, k and V0(d) from a calibration grid")
    _global_flags(cal)
    cal.add_argument("--grid", default=argparse.SUPPRESS, help="grid CSV (v_comb,v_e,delta_omega_rad_s)")
    cal.add_argument("--synthetic", default=argparse.SUPPRESS, help="synthetic preset (default: paper)")
    cal.add_argument("--noise", type=float, default=argparse.SUPPRESS,
                     help="noise sigma on delta_omega in rad/s (synthetic); default paper-scale")
    cal.add_argument("--beta-csv", default=argparse.SUPPRESS, help="precomputed BetaCurve CSV")
    cal.add_argument("--casimir-csv", default=argparse.SUPPRESS, help="precomputed force-curve CSV")
    cal.add_argument("--geometry", default=argparse.SUPPRESS)
    cal.add_argument("--material", default=argparse.SUPPRESS)
    cal.add_argument("--weight-rule", choices=["amplitude", "amplitude2"], default=argparse.SUPPRESS)

    be = sub.add_parser("beta", help="electrostatic beta(d) by finite differences")
    _global_flags(be)
    be.add_argument("--geometry", default=argparse.SUPPRESS)
    be.add_argument("--spacing-nm", type=float, default=argparse.SUPPRESS)
    be.add_argument("--v-ref", dest="V_ref", type=float, default=argparse.SUPPRESS)
    be.add_argument("--richardson", action="store_true", default=argparse.SUPPRESS)
    _grid_flags(be)

    ma = sub.add_parser("material", help="tabulate eps(i xi) for a preset or material file")
    _global_flags(ma)
    ma.add_argument("name", help="preset name or material/transport JSON file")
    ma.add_argument("--xi-min", type=float, default=1e11)
    ma.add_argument("--xi-max", type=float, default=1e18)
    ma.add_argument("--points", type=int, default=15)

    ge = sub.add_parser("geometry", help="geometry utilities")
    _global_flags(ge)
    gsub = ge.add_subparsers(dest="geometry_command", parser_class=_Parser)
    gc = gsub.add_parser("check", help="validate a geometry and report its gaps")
    _global_flags(gc)
    gc.add_argument("ref", nargs="?", default="paper-tcell")
    gx = gsub.add_parser("export", help="write a geometry file for a preset or parallel plates")
    _global_flags(gx)
    gx.add_argument("kind", choices=["paper-tcell", "plates"])
    gx.add_argument("--width-nm", type=float, default=1000.0)
    gx.add_argument("--gap-nm", type=float, default=100.0)
    gx.add_argument("--period-nm", type=float, default=None)
    gx.add_argument("--name", default=None, help="file name inside --out (default stdout)")
    return p


# --------------------------------------------------------------------------- helpers

def _flags_to_config(ns: argparse.Namespace) -> dict:
    a = vars(ns)
    flags: dict = {}
    for k in ("out", "seed", "threads", "temperature_K", "material", "material_electrode", "geometry"):
        if k in a:
            flags[k] = a[k]
    cmd = a.get("command")
    if cmd == "force-curve":
        sec = {}
        for k in ("mode", "band", "band_offset_nm", "resolution_nm", "d_start_nm", "d_stop_nm", "d_step_nm"):
            if k in a:
                sec[k] = a[k]
        flags["force_curve"] = sec
    elif cmd == "beta":
        sec = {}
        for k in ("spacing_nm", "V_ref", "richardson", "d_start_nm", "d_stop_nm", "d_step_nm"):
            if k in a:
                sec[k] = a[k]
        flags["beta"] = sec
    elif cmd == "calibrate":
        sec = {}
        if "grid" in a:
            sec["grid_csv"] = a["grid"]
        if "synthetic" in a:
            sec["synthetic"] = a["synthetic"]
        if "noise" in a:
            sec["noise_sigma"] = a["noise"]
        for k in ("beta_csv", "casimir_csv"):
            if k in a:
                sec[k] = a[k]
        flags["calibration"] = sec
        if "weight_rule" in a:
            flags["layout"] = {"weight_rule": a["weight_rule"]}
    return flags


def _hash_view(cfg: dict, command: str) -> dict:
    view = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    view["command"] = command
    return view


def _d_grid(sec) -> np.ndarray:
    start, stop, step = sec["d_start_nm"], sec["d_stop_nm"], sec["d_step_nm"]
    if not step > 0 or stop <= start:
        raise ConfigError("displacement grid needs d_step_nm > 0 and d_stop_nm > d_start_nm")
    n = int(round((stop - start) / step)) + 1
    if n < 3:
        raise ConfigError("displacement grid needs at least 3 points")
    return (start + step * np.arange(n)) * 1e-9


def _failing_module(exc: BaseException) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        base = os.path.basename(frame.filename)
        if os.sep + "nanocasimir" + os.sep in frame.filename and base != "cli.py":
            return base[:-3]
    return "nanocasimir"


def _write_outputs(out_dir: str, files: dict):
    try:
        os.makedirs(out_dir, exist_ok=True)
        for name, text in files.items():
            with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write outputs to {out_dir}: {exc.strerror}") from None


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        if hasattr(o, "value"):
            return o.value
        raise TypeError(f"not serializable: {type(o).__name__}")
    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _materials(cfg):
    a = resolve_material(cfg["material"])
    b = resolve_material(cfg["material_electrode"]) if cfg.get("material_electrode") else a
    return (a, b)


# --------------------------------------------------------------------------- commands

def cmd_force_curve(cfg: dict) -> int:
    sec = cfg["force_curve"]
    try:
        mats = _materials(cfg)
        g = resolve_geometry(cfg["geometry"])
        d = _d_grid(sec)
        mode = CurveMode(sec["mode"])
    except (ConfigError, GeometryError, ValueError, KeyError) as exc:
        return _fail(1, f"configuration error: {exc}")
    h = config_hash(_hash_view(cfg, "force-curve"))
    kw = dict(mats=mats, temperature=cfg["temperature_K"], resolution=sec["resolution_nm"] * 1e-9,
              angle_threshold_deg=sec["angle_threshold_deg"], workers=cfg["threads"])

    def run(geom):
        if mode is CurveMode.COMBINED:
            return pfa_curve(geom, d, **kw)
        return force_curve(geom, d, mode, **kw)

    try:
        curve = run(g)
        band = None
        if sec["band"]:
            off = sec["band_offset_nm"] * 1e-9
            band = (run(g.offset(-off)), run(g.offset(off)))
    except Exception as exc:  # numerical failure
        return _fail(2, f"numerical failure in {_failing_module(exc)}: {exc}")
    files = {"force_curve.csv": curve.to_csv(h)}
    report = {
        "command": "force-curve",
        "config": _hash_view(cfg, "force-curve"),
        "config_hash": h,
        "metadata": curve.metadata,
        "sign_changes_nm": [float(x) * 1e9 for x in curve.sign_changes()],
        "gradient_minimum_nm": float(curve.gradient_minimum()) * 1e9,
        "closest_approach_force_N": closest_approach_force(curve, g),
    }
    if band is not None:
        lo, hi = band
        lines = [f"# config_hash={h}",
                 "d_nm,F_shrunk,F,F_grown,Fprime_shrunk,Fprime,Fprime_grown"]
        for i, x in enumerate(d):
            lines.append(f"{x * 1e9:.6f},{lo.force[i]:.10e},{curve.force[i]:.10e},{hi.force[i]:.10e},"
                         f"{lo.gradient[i]:.10e},{curve.gradient[i]:.10e},{hi.gradient[i]:.10e}")
        files["force_curve_band.csv"] = "\n".join(lines) + "\n"
        report["band_offset_nm"] = sec["band_offset_nm"]
    files["force_curve.json"] = _json(report)
    _write_outputs(cfg["out"], files)
    print(f"force-curve: {len(d)} points, sign changes at "
          f"{', '.join(f'{x:.1f}' for x in report['sign_changes_nm']) or 'none'} nm -> {cfg['out']}")
    return 0


def cmd_beta(cfg: dict) -> int:
    sec = cfg["beta"]
    try:
        g = resolve_geometry(cfg["geometry"])
        d = _d_grid(sec)
    except (ConfigError, GeometryError, ValueError, KeyError) as exc:
        return _fail(1, f"configuration error: {exc}")
    h = config_hash(_hash_view(cfg, "beta"))
    try:
        curve = beta_of_d(g, d, sec["V_ref"], sec["spacing_nm"] * 1e-9, richardson=sec["richardson"],
                          workers=cfg["threads"])
    except Exception as exc:
        return _fail(2, f"numerical failure in {_failing_module(exc)}: {exc}")
    try:
        d_min = curve.minimum() * 1e9
    except Exception:
        d_min = None
    report = {"command": "beta", "config": _hash_view(cfg, "beta"), "config_hash": h, "beta_minimum_nm": d_min,
              "spacing_m": curve.spacing, "flagged_points": int(np.sum(curve.flagged))}
    _write_outputs(cfg["out"], {"beta.csv": curve.to_csv(h), "beta.json": _json(report)})
    print(f"beta: {len(d)} points, minimum at {d_min if d_min is None else round(d_min, 1)} nm -> {cfg['out']}")
    return 0


def _read(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None


def cmd_calibrate(cfg: dict) -> int:
    sec = cfg["calibration"]
    synth = None
    try:
        beam = resolve_beam(cfg["beam"])
        lay = cfg["layout"]
        layout = UnitLayout.centered(beam, int(lay["units"]), lay["pitch_nm"] * 1e-9, lay["weight_rule"])
        if sec.get("grid_csv"):
            grid = CalibrationGrid.from_csv(_read(sec["grid_csv"], "grid"), sec["noise_sigma"] or 0.0)
        else:
            name = sec["synthetic"]
            if name not in SYNTHETIC_PRESETS:
                raise ConfigError(f"unknown synthetic preset {name!r}; known: {sorted(SYNTHETIC_PRESETS)}")
            synth = SYNTHETIC_PRESETS[name]
            grid = None
        if grid is not None and grid.v_e.size < 4:
            raise ConfigError(f"insufficient V_e span: {grid.v_e.size} V_e value(s), need at least 4")
        beta_curve = BetaCurve.from_csv(_read(sec["beta_csv"], "beta CSV")) if sec.get("beta_csv") else None
        casimir = ForceCurve.from_csv(_read(sec["casimir_csv"], "force-curve CSV")) \
            if sec.get("casimir_csv") else None
        g = resolve_geometry(cfg["geometry"]) if beta_curve is None or (synth and casimir is None) else None
        mats = _materials(cfg) if synth and casimir is None else None
    except (ConfigError, GeometryError, ValueError, KeyError, TypeError) as exc:
        return _fail(1, f"configuration error: {exc}")
    h = config_hash(_hash_view(cfg, "calibrate"))
    files = {}
    report: dict = {"command": "calibrate", "config": _hash_view(cfg, "calibrate"), "config_hash": h}
    try:
        if synth is not None:
            step = synth["d_step_nm"]
            d_truth = (synth["d_start_nm"] + step * np.arange(
                int(round((synth["d_stop_nm"] - synth["d_start_nm"]) / step)) + 1)) * 1e-9
            lo, hi = d_truth[0] - 4 * step * 1e-9, d_truth[-1] + 4 * step * 1e-9
        else:
            bs = cfg["beta"]
            lo, hi = bs["d_start_nm"] * 1e-9, bs["d_stop_nm"] * 1e-9
        if beta_curve is None:
            bs = cfg["beta"]
            bstep = bs["d_step_nm"] * 1e-9
            d_beta = np.arange(math.floor(lo / bstep), math.ceil(hi / bstep) + 1) * bstep
            beta_curve = beta_of_d(g, d_beta, bs["V_ref"], bs["spacing_nm"] * 1e-9, workers=cfg["threads"])
        if synth is not None:
            if casimir is None:
                dc = np.arange(math.floor(lo / 5e-9) - 2, math.ceil(hi / 5e-9) + 3) * 5e-9
                casimir = pfa_curve(g, dc, mats, cfg["temperature_K"], workers=cfg["threads"])
            alpha = synth["alpha_nm_per_V2"] * 1e-9
            truth = SyntheticTruth(alpha, synth["k_cal"], np.array([d_truth[0], d_truth[-1]]),
                                   np.array([synth["v0_start_V"], synth["v0_stop_V"]]))
            v_comb = np.sqrt(d_truth / alpha) + sec["v_offset"]
            v_e = np.linspace(synth["v_e_min"], synth["v_e_max"], int(synth["v_e_points"]))
            sigma = sec["noise_sigma"]
            if sigma is None:
                sigma = paper_scale_noise(casimir, d_truth, synth["k_cal"], layout.weights)
            grid = synthesize_grid(truth, beta_curve, casimir, v_comb, v_e, sigma, cfg["seed"],
                                   layout.weights, sec["v_offset"])
            files["grid.csv"] = grid.to_csv(h)
            report["synthetic"] = {"preset": sec["synthetic"], **synth, "noise_sigma_rad_s": sigma,
                                   "seed": cfg["seed"]}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = fit_alpha_k(grid, beta_curve, layout.weights, d_l_err=sec["d_l_err_nm"] * 1e-9,
                                 v_offset=sec["v_offset"])
    except Exception as exc:
        return _fail(2, f"numerical failure in {_failing_module(exc)}: {exc}")
    result.config_hash = h
    report["result"] = result.to_dict()
    report["weight_rule"] = layout.rule.value
    report["weight_sum"] = layout.total_weight
    if synth is not None:
        report["recovery"] = {
            "alpha_rel_error": result.alpha / synth["alpha_nm_per_V2"] - 1,
            "k_rel_error": result.k_cal / synth["k_cal"] - 1,
        }
    files["calibration.json"] = _json(report)
    files["v0.csv"] = result.v0_table.to_csv(h)
    lines = [f"# config_hash={h}", "d_nm,Fprime_N_per_m,err_N_per_m"]
    for x, f, e in zip(result.casimir_d, result.casimir_gradient, result.casimir_err):
        lines.append(f"{x * 1e9:.6f},{f:.10e},{e:.4e}")
    files["casimir_residual.csv"] = "\n".join(lines) + "\n"
    _write_outputs(cfg["out"], files)
    print(f"calibrate: alpha = {result.alpha:.4f} +/- {result.alpha_err:.4f} nm/V^2, "
          f"k = {result.k_cal:.5e} +/- {result.k_err:.2e} -> {cfg['out']}")
    return 0


def cmd_material(name: str, xi_min: float, xi_max: float, points: int) -> int:
    transport = None
    try:
        if os.path.isfile(name):
            data = json.loads(_read(name, "material"))
            if "transport" in data and set(data) == {"transport"}:
                transport = CarrierTransport(**data["transport"])
            m = resolve_material(name) if transport is None else None
        else:
            m = resolve_material(name)
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        return _fail(1, f"configuration error: {exc}")
    if transport is not None:
        wp, gam = drude_params_from_transport(transport)
        print(f"transport: n = {transport.carrier_density:.4g} m^-3, rho = {transport.resistivity:.4g} ohm m, "
              f"m*/m_e = {transport.effective_mass_ratio:g}")
        print(f"omega_p = {wp:.4e} rad/s")
        print(f"gamma   = {gam:.4e} rad/s")
        return 0
    print(f"material: {m.label} ({m.kind.value})")
    if m.has_drude:
        print(f"omega_p = {m.omega_p:.4e} rad/s, gamma = {m.gamma:.4e} rad/s")
    print(f"eps(xi -> 0+) without carriers = {m.static_permittivity():.4g}")
    xi = np.geomspace(xi_min, xi_max, points)
    eps = epsilon_i_xi(m, xi)
    print("xi_rad_s,eps_i_xi")
    for x, e in zip(xi, np.broadcast_to(eps, xi.shape)):
        print(f"{x:.4e},{e:.6g}")
    return 0


def cmd_geometry_check(ref: str) -> int:
    try:
        g = resolve_geometry(ref)
    except (ConfigError, GeometryError, ValueError) as exc:
        return _fail(1, f"invalid geometry: {exc}")
    print(f"geometry: {ref}")
    print(f"period = {g.period * 1e9:.2f} nm, thickness = {g.thickness * 1e9:.2f} nm")
    print(f"beam polygon: {len(g.beam_side.vertices)} vertices, area {g.beam_side.area * 1e12:.4f} um^2")
    print(f"electrode polygon: {len(g.electrode_side.vertices)} vertices, "
          f"area {g.electrode_side.area * 1e12:.4f} um^2")
    print(f"min separation at d = 0: {min_separation(g, 0.0) * 1e9:.3f} nm")
    print(f"alignment displacement = {g.alignment_displacement * 1e9:.2f} nm, "
          f"tip gap there = {tip_gap(g) * 1e9:.3f} nm")
    if g.tcell is not None or ref in GEOMETRY_PRESETS:
        print(f"note: {TCELL_CAVEAT}")
    return 0


def cmd_geometry_export(kind, width_nm, gap_nm, period_nm, out_dir, name) -> int:
    try:
        if kind == "paper-tcell":
            g = make_t_cell()
        else:
            g = parallel_plates(width_nm * 1e-9, gap_nm * 1e-9, None if period_nm is None else period_nm * 1e-9)
    except GeometryError as exc:
        return _fail(1, f"invalid geometry: {exc}")
    text = save_geometry(g)
    if name:
        _write_outputs(out_dir, {name: text})
    else:
        sys.stdout.write(text)
    return 0


def _fail(code: int, message: str) -> int:
    print(f"nanocasimir: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help()
        return 1
    try:
        file_cfg = load_config(getattr(ns, "config", None))
        cfg = resolve_config(file_cfg, _flags_to_config(ns))
    except ConfigError as exc:
        return _fail(1, str(exc))
    if not (isinstance(cfg["threads"], int) and cfg["threads"] >= 1):
        return _fail(1, "threads must be a positive integer")
    try:
        if ns.command == "force-curve":
            return cmd_force_curve(cfg)
        if ns.command == "beta":
            return cmd_beta(cfg)
        if ns.command == "calibrate":
            return cmd_calibrate(cfg)
        if ns.command == "material":
            return cmd_material(ns.name, ns.xi_min, ns.xi_max, ns.points)
        if ns.command == "geometry":
            if ns.geometry_command == "check":
                return cmd_geometry_check(ns.ref)
            if ns.geometry_command == "export":
                return cmd_geometry_export(ns.kind, ns.width_nm, ns.gap_nm, ns.period_nm, cfg["out"], ns.name)
            parser.parse_args(["geometry", "--help"])
            return 1
    except ConfigError as exc:
        return _fail(1, str(exc))
    return 1


if __name__ == "__main__":
    sys.exit(main())
