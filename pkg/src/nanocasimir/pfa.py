"""Proximity-force approximation on strip decompositions of the unit cell.

Two prescriptions are supported. ``ForceY`` sums the plate pressure over
strips facing along y. ``EnergyX`` sums plate energies over strips facing
along x and differentiates the total energy with respect to displacement.
Their sum (``combined_curve``) stands in for the full curve.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import Axis, UnitCellGeometry, facing_strips, min_separation
from .lifshitz import PlateKernelConfig, plate_integrals
from .materials import DielectricModel
from .parallel import pmap


class CurveMode(str, enum.Enum):
    FORCE_Y = "ForceY"
    ENERGY_X = "EnergyX"
    COMBINED = "Combined"


# --------------------------------------------------------------------------- kernel cache

class PlateKernel:
    """Tabulated plate energy and pressure for one material pair and temperature.

    The table spans 10 nm to 3 um on 200 log-spaced gaps; the smooth
    dimensionless ratios E a^3 and P a^4 are interpolated with cubic splines
    in log(a). Gaps outside the table are evaluated directly.
    """

    def __init__(self, a: DielectricModel, b: DielectricModel, cfg: PlateKernelConfig | None = None,
                 gap_min=10e-9, gap_max=3e-6, n_points=200):
        self.a, self.b = a, b
        self.cfg = cfg or PlateKernelConfig()
        self.gap_min, self.gap_max = gap_min, gap_max
        self.table_gaps = np.geomspace(gap_min, gap_max, n_points)
        energy, pressure = plate_integrals(a, b, self.table_gaps, self.cfg)
        x = np.log(self.table_gaps)
        self._energy = CubicSpline(x, energy * self.table_gaps**3)
        self._pressure = CubicSpline(x, pressure * self.table_gaps**4)

    def _eval(self, gaps, which):
        gaps = np.asarray(gaps, dtype=float)
        out = np.empty_like(gaps)
        inside = (gaps >= self.gap_min) & (gaps <= self.gap_max)
        if np.any(inside):
            g = gaps[inside]
            if which == "energy":
                out[inside] = self._energy(np.log(g)) / g**3
            else:
                out[inside] = self._pressure(np.log(g)) / g**4
        if np.any(~inside):
            e, p = plate_integrals(self.a, self.b, gaps[~inside], self.cfg)
            out[~inside] = e if which == "energy" else p
        return out

    def energy(self, gaps):
        return self._eval(gaps, "energy")

    def pressure(self, gaps):
        return self._eval(gaps, "pressure")


_KERNELS: dict = {}


def get_kernel(mats, temperature=0.0, cfg: PlateKernelConfig | None = None) -> PlateKernel:
    """Shared kernel for a material pair, built once then read-only."""
    a, b = _pair(mats)
    if cfg is None:
        cfg = PlateKernelConfig(temperature=temperature)
    key = (a, b, cfg)
    if key not in _KERNELS:
        _KERNELS[key] = PlateKernel(a, b, cfg)
    return _KERNELS[key]


def _pair(mats):
    if isinstance(mats, DielectricModel):
        return mats, mats
    a, b = mats
    return a, b


# --------------------------------------------------------------------------- single-d quantities

def pfa_force_y(g: UnitCellGeometry, d, mats, temperature=0.0, resolution=1e-9,
                angle_threshold_deg=45.0, kernel: PlateKernel | None = None) -> float:
    """y-force (N) on the electrode per unit cell from y-facing strips.

    Positive values pull the electrode towards the beam.
    """
    kernel = kernel or get_kernel(mats, temperature)
    s = facing_strips(g, d, Axis.Y, resolution, angle_threshold_deg)
    if len(s) == 0:
        return 0.0
    return float(np.sum(-kernel.pressure(s.gap) * s.width * s.sign) * g.thickness)


def pfa_energy_x(g: UnitCellGeometry, d, mats, temperature=0.0, resolution=1e-9,
                 angle_threshold_deg=45.0, kernel: PlateKernel | None = None) -> float:
    """Casimir energy (J) per unit cell from x-facing strips, fringes ignored."""
    kernel = kernel or get_kernel(mats, temperature)
    s = facing_strips(g, d, Axis.X, resolution, angle_threshold_deg)
    if len(s) == 0:
        return 0.0
    return float(np.sum(kernel.energy(s.gap) * s.width) * g.thickness)


def energy_x_force(g, d, step, mats, temperature=0.0, resolution=1e-9, angle_threshold_deg=45.0,
                   kernel=None) -> float:
    """-dE/dd from a central difference of pfa_energy_x with half-width ``step``."""
    kw = dict(mats=mats, temperature=temperature, resolution=resolution,
              angle_threshold_deg=angle_threshold_deg, kernel=kernel)
    return -(pfa_energy_x(g, d + step, **kw) - pfa_energy_x(g, d - step, **kw)) / (2 * step)


# --------------------------------------------------------------------------- curves

@dataclass
class ForceCurve:
    """Force and force gradient per unit cell sampled over displacement."""

    displacements: np.ndarray
    force: np.ndarray
    gradient: np.ndarray
    mode: CurveMode
    metadata: dict = field(default_factory=dict)
    energy: np.ndarray | None = None

    def __post_init__(self):
        self.displacements = np.asarray(self.displacements, dtype=float)
        self.force = np.asarray(self.force, dtype=float)
        self.gradient = np.asarray(self.gradient, dtype=float)
        self.mode = CurveMode(self.mode)
        n = len(self.displacements)
        if len(self.force) != n or len(self.gradient) != n:
            raise ValueError("displacement, force and gradient lengths differ")
        if n > 1 and np.any(np.diff(self.displacements) <= 0):
            raise ValueError("displacements must be strictly increasing")

    def scaled(self, factor: float) -> ForceCurve:
        return ForceCurve(self.displacements, self.force * factor, self.gradient * factor,
                          self.mode, dict(self.metadata),
                          None if self.energy is None else self.energy * factor)

    def sign_changes(self) -> np.ndarray:
        """Displacements where the gradient changes sign (linear interpolation)."""
        g = self.gradient
        idx = np.nonzero(np.signbit(g[:-1]) != np.signbit(g[1:]))[0]
        x0, x1 = self.displacements[idx], self.displacements[idx + 1]
        g0, g1 = g[idx], g[idx + 1]
        return x0 - g0 * (x1 - x0) / (g1 - g0)

    def gradient_minimum(self) -> float:
        """Displacement of the most negative gradient, parabolic refinement."""
        return _parabolic_vertex(self.displacements, self.gradient, np.argmin(self.gradient))

    def to_csv(self, config_hash: str | None = None) -> str:
        lines = [f"# config_hash={config_hash}"] if config_hash else []
        lines.append("d_nm,F_N_per_cell,Fprime_N_per_m_per_cell,mode")
        for d, f, fp in zip(self.displacements, self.force, self.gradient):
            lines.append(f"{d * 1e9:.6f},{f:.10e},{fp:.10e},{self.mode.value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> ForceCurve:
        rows = [ln for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[0].split(",")[:3] != ["d_nm", "F_N_per_cell", "Fprime_N_per_m_per_cell"]:
            raise ValueError("not a force-curve CSV")
        data = [r.split(",") for r in rows[1:]]
        if not data:
            raise ValueError("force-curve CSV has no rows")
        d = np.array([float(r[0]) for r in data]) * 1e-9
        f = np.array([float(r[1]) for r in data])
        fp = np.array([float(r[2]) for r in data])
        mode = data[0][3] if len(data[0]) > 3 else CurveMode.COMBINED.value
        return cls(d, f, fp, mode)


def _parabolic_vertex(x, y, i):
    i = int(np.clip(i, 1, len(x) - 2))
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a == 0:
        return float(x1)
    return float(-b / (2 * a))


def second_difference(y, h):
    """d2y/dx2 on a uniform grid: central inside, one-sided second order at the ends."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    if len(y) >= 4:
        out[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h**2
        out[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h**2
    else:
        out[0], out[-1] = out[1], out[-2]
    return out


def _check_grid(d_grid):
    d = np.asarray(d_grid, dtype=float)
    if d.ndim != 1 or len(d) < 3:
        raise ValueError("displacement grid needs at least 3 points")
    steps = np.diff(d)
    if np.any(steps <= 0):
        raise ValueError("displacement grid must be strictly increasing")
    if np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
        raise ValueError("displacement grid must be uniform")
    return d, float(steps[0])


def _material_names(mats):
    a, b = _pair(mats)
    return [a.label, b.label]


def force_curve(g: UnitCellGeometry, d_grid, mode, mats, temperature=0.0, resolution=1e-9,
                angle_threshold_deg=45.0, kernel: PlateKernel | None = None, workers: int = 1) -> ForceCurve:
    """Sample F(d) and F'(d) per unit cell in the ForceY or EnergyX prescription."""
    mode = CurveMode(mode)
    d, h = _check_grid(d_grid)
    kernel = kernel or get_kernel(mats, temperature)
    meta = {
        "mode": mode.value,
        "materials": _material_names(mats),
        "resolution_m": resolution,
        "temperature_K": temperature,
        "angle_threshold_deg": angle_threshold_deg,
        "thickness_m": g.thickness,
        "warnings": [],
    }
    if h > 10e-9:
        meta["warnings"].append(f"displacement step {h * 1e9:.3g} nm exceeds 10 nm")
    kw = dict(mats=mats, temperature=temperature, resolution=resolution,
              angle_threshold_deg=angle_threshold_deg, kernel=kernel)
    energy = None
    if mode is CurveMode.FORCE_Y:
        force = np.array(pmap(lambda x: pfa_force_y(g, x, **kw), d, workers))
        gradient = np.gradient(force, h, edge_order=2)
    elif mode is CurveMode.ENERGY_X:
        energy = np.array(pmap(lambda x: pfa_energy_x(g, x, **kw), d, workers))
        force = -np.gradient(energy, h, edge_order=2)
        gradient = -second_difference(energy, h)
    else:
        raise ValueError("use combined_curve for the combined prescription")
    return ForceCurve(d, force, gradient, mode, meta, energy)


def combined_curve(force_y: ForceCurve, energy_x: ForceCurve) -> ForceCurve:
    """Sum of the y-facing (tops, frames) and x-facing (cap sides) channels."""
    if force_y.mode is not CurveMode.FORCE_Y or energy_x.mode is not CurveMode.ENERGY_X:
        raise ValueError("combined_curve expects a ForceY and an EnergyX curve")
    if force_y.displacements.shape != energy_x.displacements.shape or not np.allclose(
            force_y.displacements, energy_x.displacements, rtol=0, atol=1e-15):
        raise ValueError("curves do not share a displacement grid")
    meta = dict(force_y.metadata)
    meta["mode"] = CurveMode.COMBINED.value
    meta["warnings"] = sorted(set(force_y.metadata.get("warnings", []))
                              | set(energy_x.metadata.get("warnings", [])))
    return ForceCurve(force_y.displacements, force_y.force + energy_x.force,
                      force_y.gradient + energy_x.gradient, CurveMode.COMBINED, meta)


def pfa_curve(g, d_grid, mats, temperature=0.0, resolution=1e-9, angle_threshold_deg=45.0,
              kernel=None, workers: int = 1) -> ForceCurve:
    """Combined ForceY + EnergyX curve in one call."""
    kw = dict(mats=mats, temperature=temperature, resolution=resolution,
              angle_threshold_deg=angle_threshold_deg, kernel=kernel, workers=workers)
    return combined_curve(force_curve(g, d_grid, CurveMode.FORCE_Y, **kw),
                          force_curve(g, d_grid, CurveMode.ENERGY_X, **kw))


def closest_approach_force(curve: ForceCurve, g: UnitCellGeometry, tol=0.5e-9) -> float:
    """Largest |F| over displacements where the bodies are at their closest.

    Closest approach is the set of sampled displacements whose minimum
    beam-electrode separation is within ``tol`` of the smallest one in the
    sweep.
    """
    seps = np.array([min_separation(g, d) for d in curve.displacements])
    closest = seps <= seps.min() + tol
    return float(np.max(np.abs(curve.force[closest])))


# --------------------------------------------------------------------------- ensembles

@dataclass
class UnitEnsemble:
    """Per-unit geometries with their (non-negative) contribution weights."""

    geometries: list
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.geometries) != len(self.weights):
            raise ValueError("one weight per unit geometry is required")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")


def aggregate_units(e: UnitEnsemble, curves) -> ForceCurve:
    """Weighted sum of per-unit curves sharing one displacement grid."""
    curves = list(curves)
    if len(curves) != len(e.weights):
        raise ValueError(f"{len(curves)} curves for {len(e.weights)} units")
    d = curves[0].displacements
    for c in curves[1:]:
        if c.displacements.shape != d.shape or not np.array_equal(c.displacements, d):
            raise ValueError("unit curves do not share a displacement grid")
    force = np.zeros_like(d)
    gradient = np.zeros_like(d)
    for w, c in zip(e.weights, curves):
        force = force + w * c.force
        gradient = gradient + w * c.gradient
    meta = dict(curves[0].metadata)
    meta["aggregated_units"] = len(curves)
    meta["weight_sum"] = float(np.sum(e.weights))
    return ForceCurve(d, force, gradient, curves[0].mode, meta)


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.value
    if hasattr(obj, "__dataclass_fields__"):
        from dataclasses import asdict
        return asdict(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return str(obj)
