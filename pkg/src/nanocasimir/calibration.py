"""Electrostatic calibration: parabola fits, residual voltage, alpha and k.

Every column of a calibration grid (fixed comb voltage, so fixed
displacement d) is a parabola in the electrode voltage,

    delta_omega = c (V_e - V0)^2 + y0,  c = beta(d)/k,  y0 = F'_cas(d)/k.

The vertex gives the residual voltage V0(d), the curvature traces the
electrostatic gradient and the vertical offset is the Casimir gradient.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FitError

PAPER_COMB_OFFSET = 0.029  # V, comb parabola minimum
PAPER_ALPHA = 5.48e-9  # m/V^2
PAPER_K = 1.07e-6  # N s rad^-1 m^-1
PAPER_D_L_TOL = 14e-9  # m
PAPER_V0_RAMP = (-0.016, -0.058)  # V, from the smallest to the largest displacement
# synthetic noise: this fraction of the peak Casimir frequency shift
PAPER_NOISE_FRACTION = 0.005
NEAR_ZERO_BETA = 0.1


def comb_displacement(alpha: float, v_comb, v_offset: float = 0.0):
    """Comb-drive displacement alpha (V_comb - v_offset)^2 in m."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    v = np.asarray(v_comb, dtype=float)
    out = alpha * (v - v_offset) ** 2
    return float(out) if out.ndim == 0 else out


def parabolic_minimum(x, y, return_jacobian=False):
    """Vertex of the parabola through the lowest sample and its neighbours."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise FitError("need at least three samples to locate a minimum")
    i = int(np.argmin(y))
    if i == 0 or i == x.size - 1:
        raise FitError("no interior minimum")

    def vertex(y3):
        x0, x1, x2 = x[i - 1:i + 2]
        y0, y1, y2 = y3
        num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
        den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
        if den == 0:
            raise FitError("flat minimum")
        return x1 - 0.5 * num / den

    y3 = y[i - 1:i + 2].copy()
    xv = vertex(y3)
    if not return_jacobian:
        return xv
    jac = np.zeros(x.size)
    scale = max(np.ptp(y3), 1e-300)
    for k in range(3):
        step = 1e-6 * scale
        yp, ym = y3.copy(), y3.copy()
        yp[k] += step
        ym[k] -= step
        jac[i - 1 + k] = (vertex(yp) - vertex(ym)) / (2 * step)
    return xv, jac


# --------------------------------------------------------------------------- grid

@dataclass
class CalibrationGrid:
    v_comb: np.ndarray
    v_e: np.ndarray
    delta_omega: np.ndarray  # shape (len(v_comb), len(v_e)), rad/s
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.v_comb = np.asarray(self.v_comb, dtype=float)
        self.v_e = np.asarray(self.v_e, dtype=float)
        self.delta_omega = np.asarray(self.delta_omega, dtype=float)
        for name, ax in (("v_comb", self.v_comb), ("v_e", self.v_e)):
            if ax.ndim != 1 or ax.size == 0:
                raise ValueError(f"{name} must be a non-empty 1D axis")
            if ax.size > 1 and np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if self.delta_omega.shape != (self.v_comb.size, self.v_e.size):
            raise ValueError(f"delta_omega shape {self.delta_omega.shape} does not match the axes")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def scaled(self, factor: float) -> CalibrationGrid:
        return CalibrationGrid(self.v_comb, self.v_e, self.delta_omega * factor, self.noise_sigma * abs(factor))

    def to_csv(self, config_hash: str | None = None) -> str:
        lines = [f"# config_hash={config_hash}"] if config_hash else []
        lines.append("v_comb,v_e,delta_omega_rad_s")
        for i, vc in enumerate(self.v_comb):
            for j, ve in enumerate(self.v_e):
                lines.append(f"{float(vc)!r},{float(ve)!r},{float(self.delta_omega[i, j])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, noise_sigma: float = 0.0) -> CalibrationGrid:
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or [h.strip() for h in rows[0].split(",")] != ["v_comb", "v_e", "delta_omega_rad_s"]:
            raise ValueError("grid CSV must start with 'v_comb,v_e,delta_omega_rad_s'")
        try:
            data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        except ValueError as exc:
            raise ValueError(f"grid CSV: {exc}") from None
        if data.size == 0:
            raise ValueError("grid CSV has no data rows")
        vc = np.unique(data[:, 0])
        ve = np.unique(data[:, 1])
        if len(data) != vc.size * ve.size:
            raise ValueError("grid CSV is not a complete v_comb x v_e grid")
        out = np.full((vc.size, ve.size), np.nan)
        out[np.searchsorted(vc, data[:, 0]), np.searchsorted(ve, data[:, 1])] = data[:, 2]
        if np.any(np.isnan(out)):
            raise ValueError("grid CSV has duplicate or missing points")
        return cls(vc, ve, out, noise_sigma)


# --------------------------------------------------------------------------- parabola fit

@dataclass
class ParabolaFit:
    v0: float
    curvature: float
    vertical_offset: float
    covariance: np.ndarray  # over (v0, curvature, vertical_offset)
    flagged: bool = False  # curvature not resolved above noise
    v0_err: float = 0.0

    @property
    def curvature_err(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    @property
    def offset_err(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))


def fit_parabola(v_e, delta_omega, sigma) -> ParabolaFit:
    """Weighted least squares of y = c (V_e - v0)^2 + y0.

    Solved in the linear basis (V^2, V, 1) and mapped to vertex form with
    the delta method. ``sigma`` is a scalar or per-sample noise; 0 means an
    unweighted fit with zero covariance. A curvature within 3 sigma of
    zero is flagged and v0 is then only bounded by the scan range.
    """
    v = np.asarray(v_e, dtype=float)
    y = np.asarray(delta_omega, dtype=float)
    if v.size < 4 or v.shape != y.shape:
        raise FitError("need at least 4 matching samples")
    s = np.broadcast_to(np.asarray(sigma, dtype=float), v.shape)
    weighted = bool(np.all(s > 0))
    w = 1.0 / s if weighted else np.ones_like(v)
    X = np.column_stack([v**2, v, np.ones_like(v)])
    Xw = X * w[:, None]
    if np.linalg.matrix_rank(Xw) < 3:
        raise FitError("degenerate design matrix: V_e samples do not span a parabola")
    coef, *_ = np.linalg.lstsq(Xw, y * w, rcond=None)
    cov_lin = np.linalg.inv(Xw.T @ Xw) if weighted else np.zeros((3, 3))
    a, b, c = coef
    if a == 0:
        raise FitError("zero curvature: no vertex")
    v0 = -b / (2 * a)
    y0 = c - b * b / (4 * a)
    J = np.array([
        [b / (2 * a * a), -1 / (2 * a), 0.0],
        [1.0, 0.0, 0.0],
        [b * b / (4 * a * a), -b / (2 * a), 1.0],
    ])
    cov = J @ cov_lin @ J.T
    a_err = math.sqrt(max(cov_lin[0, 0], 0.0))
    v0_err = math.sqrt(max(cov[0, 0], 0.0))
    flagged = abs(a) < 3 * a_err
    if flagged:
        v0_err = max(v0_err, float(np.ptp(v)))
    return ParabolaFit(float(v0), float(a), float(y0), cov, flagged, v0_err)


# --------------------------------------------------------------------------- V0(d)

@dataclass
class V0Table:
    d: np.ndarray
    v0: np.ndarray
    v0_err: np.ndarray
    flagged: np.ndarray
    curvature: np.ndarray
    curvature_err: np.ndarray
    offset: np.ndarray
    offset_err: np.ndarray

    def to_csv(self, config_hash: str | None = None) -> str:
        lines = [f"# config_hash={config_hash}"] if config_hash else []
        lines.append("d_nm,v0_V,v0_err_V,flag")
        for d, v, e, f in zip(self.d, self.v0, self.v0_err, self.flagged):
            lines.append(f"{d * 1e9:.6f},{v:.8e},{e:.3e},{int(f)}")
        return "\n".join(lines) + "\n"


def _column_fits(grid: CalibrationGrid):
    if grid.v_e.size < 4:
        raise FitError("insufficient V_e span: need at least 4 V_e points per V_comb")
    return [fit_parabola(grid.v_e, row, grid.noise_sigma) for row in grid.delta_omega]


def _table(fits, d):
    return V0Table(
        d=np.asarray(d, dtype=float),
        v0=np.array([f.v0 for f in fits]),
        v0_err=np.array([f.v0_err for f in fits]),
        flagged=np.array([f.flagged for f in fits]),
        curvature=np.array([f.curvature for f in fits]),
        curvature_err=np.array([f.curvature_err for f in fits]),
        offset=np.array([f.vertical_offset for f in fits]),
        offset_err=np.array([f.offset_err for f in fits]),
    )


def extract_v0_curve(grid: CalibrationGrid, alpha: float, v_offset: float = 0.0) -> V0Table:
    """Per-column parabola vertices on the displacement axis implied by alpha."""
    d = comb_displacement(alpha, grid.v_comb, v_offset)
    return _table(_column_fits(grid), np.atleast_1d(d))


# --------------------------------------------------------------------------- alpha, k

@dataclass
class CalibrationResult:
    alpha: float  # nm/V^2
    alpha_err: float
    k_cal: float
    k_err: float
    d_l: float  # m
    d_l_err: float
    v0_table: V0Table
    casimir_d: np.ndarray
    casimir_gradient: np.ndarray  # N/m, residual at the parabola vertices
    casimir_err: np.ndarray
    reduced_chi2: float
    warnings: list = field(default_factory=list)
    config_hash: str = ""

    def __post_init__(self):
        if not (self.alpha > 0 and self.k_cal > 0):
            raise FitError("calibration produced a non-positive alpha or k")
        if self.alpha_err < 0 or self.k_err < 0:
            raise FitError("negative uncertainty")

    def to_dict(self) -> dict:
        t = self.v0_table
        return {
            "alpha_nm_per_V2": self.alpha,
            "alpha_err_nm_per_V2": self.alpha_err,
            "k_cal_N_s_per_rad_m": self.k_cal,
            "k_err_N_s_per_rad_m": self.k_err,
            "d_l_m": self.d_l,
            "d_l_err_m": self.d_l_err,
            "reduced_chi2": self.reduced_chi2,
            "warnings": list(self.warnings),
            "v0_of_d": [
                {"d_m": float(d), "v0_V": float(v), "v0_err_V": float(e), "flagged": bool(f)}
                for d, v, e, f in zip(t.d, t.v0, t.v0_err, t.flagged)
            ],
            "casimir_gradient": [
                {"d_m": float(d), "Fprime_N_per_m": float(f), "err_N_per_m": float(e)}
                for d, f, e in zip(self.casimir_d, self.casimir_gradient, self.casimir_err)
            ],
            "config_hash": self.config_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _weight_factor(weights) -> float:
    if weights is None:
        return 1.0
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    return float(np.sum(w))


def fit_alpha_k(grid: CalibrationGrid, beta_curve, weights=None, d_l: float | None = None,
                d_l_err: float = PAPER_D_L_TOL, v_offset: float = 0.0,
                near_zero_beta: float = NEAR_ZERO_BETA) -> CalibrationResult:
    """alpha from the gradient minimum, then k by 1D weighted least squares.

    ``beta_curve`` is the per-unit electrostatic model; ``weights`` are the
    per-unit contribution weights whose sum scales it to the whole beam
    (None for a model that already describes the whole beam). ``d_l``
    defaults to the model's own beta minimum. Columns where the model
    |beta| is below ``near_zero_beta`` times its largest value on the grid
    are flagged in the V0 table alongside statistically unresolved ones.
    """
    factor = _weight_factor(weights)
    fits = _column_fits(grid)
    curv = np.array([f.curvature for f in fits])
    curv_err = np.array([f.curvature_err for f in fits])
    x = (grid.v_comb - v_offset) ** 2
    if np.any(np.diff(x) <= 0):
        raise FitError("V_comb axis must give increasing (V_comb - offset)^2")
    try:
        x_min, jac = parabolic_minimum(x, curv, return_jacobian=True)
    except FitError as exc:
        raise FitError(f"no interior minimum of the measured gradient: {exc}") from None
    x_min_err = float(np.sqrt(np.sum((jac * curv_err) ** 2)))
    if d_l is None:
        d_l = beta_curve.minimum()
    alpha = d_l / x_min
    alpha_rel = math.hypot(d_l_err / d_l, x_min_err / x_min)

    d = alpha * x
    lo, hi = beta_curve.displacements[0], beta_curve.displacements[-1]
    if d[0] < lo - 1e-12 or d[-1] > hi + 1e-12:
        raise DomainError(f"beta model covers [{lo:g}, {hi:g}] m but the grid spans "
                          f"[{d[0]:g}, {d[-1]:g}] m")
    beta = factor * beta_curve(d)

    # curvature = beta / k, so s = 1/k is a one-parameter fit. The
    # statistical error of the minimum location misregisters d; its effect
    # through the slope of beta joins the curvature variance.
    slope = factor * np.gradient(beta_curve(d), d) if d.size > 1 else np.zeros_like(d)
    sigma_d = d * x_min_err / x_min
    s = np.sum(beta * curv) / np.sum(beta**2)
    var = curv_err**2 + (s * slope * sigma_d) ** 2
    wts = 1.0 / var if np.all(var > 0) else np.ones_like(curv)
    s = np.sum(wts * beta * curv) / np.sum(wts * beta**2)
    resid = curv - s * beta
    dof = max(curv.size - 1, 1)
    if np.all(var > 0):
        chi2 = float(np.sum(wts * resid**2) / dof)
        s_err = 1.0 / math.sqrt(np.sum(wts * beta**2))
    else:
        chi2 = float("nan")
        s_err = math.sqrt(np.sum(resid**2) / dof / np.sum(beta**2))
    k = 1.0 / s
    k_err = s_err / s**2

    notes = []
    if chi2 > 3:
        msg = f"poor electrostatic fit: reduced chi2 = {chi2:.3g} > 3"
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)

    table = _table(fits, d)
    table.flagged = table.flagged | (np.abs(beta) < near_zero_beta * np.max(np.abs(beta)))
    fprime = k * table.offset
    fprime_err = np.hypot(k * table.offset_err, table.offset * k_err)
    return CalibrationResult(
        alpha=alpha * 1e9, alpha_err=alpha * alpha_rel * 1e9, k_cal=k, k_err=k_err,
        d_l=d_l, d_l_err=d_l_err, v0_table=table, casimir_d=d, casimir_gradient=fprime,
        casimir_err=fprime_err, reduced_chi2=chi2, warnings=notes,
    )


# --------------------------------------------------------------------------- synthesis

@dataclass
class SyntheticTruth:
    alpha: float = PAPER_ALPHA  # m/V^2
    k: float = PAPER_K
    v0_d: np.ndarray | None = None  # table abscissae, m
    v0: np.ndarray | None = None  # V

    def v0_at(self, d):
        if self.v0_d is None:
            return np.zeros_like(np.asarray(d, dtype=float))
        return np.interp(d, self.v0_d, self.v0)


def v0_ramp(d_lo: float, d_hi: float, ramp=PAPER_V0_RAMP):
    """Linear residual-voltage table across [d_lo, d_hi]."""
    return np.array([d_lo, d_hi]), np.array(ramp, dtype=float)


def _curve_values(curve, d):
    """Evaluate a Casimir gradient given as a callable, ForceCurve or (d, F') pair."""
    if callable(curve):
        return np.asarray(curve(d), dtype=float)
    if hasattr(curve, "displacements") and hasattr(curve, "gradient"):
        xs, ys = curve.displacements, curve.gradient
    else:
        xs, ys = (np.asarray(a, dtype=float) for a in curve)
    tol = 1e-12
    if np.any(d < xs[0] - tol) or np.any(d > xs[-1] + tol):
        raise DomainError(f"Casimir curve covers [{xs[0]:g}, {xs[-1]:g}] m, grid needs "
                          f"[{np.min(d):g}, {np.max(d):g}] m")
    return np.interp(d, xs, ys)


def synthesize_grid(truth: SyntheticTruth, beta_curve, casimir_curve, v_comb, v_e,
                    noise_sigma: float = 0.0, seed: int = 0, weights=None,
                    v_offset: float = 0.0) -> CalibrationGrid:
    """Forward model [beta (V_e - V0)^2 + F'_cas]/k plus seeded Gaussian noise."""
    v_comb = np.asarray(v_comb, dtype=float)
    v_e = np.asarray(v_e, dtype=float)
    factor = _weight_factor(weights)
    d = comb_displacement(truth.alpha, v_comb, v_offset)
    d = np.atleast_1d(d)
    beta = factor * beta_curve(d)
    fcas = factor * _curve_values(casimir_curve, d)
    v0 = truth.v0_at(d)
    grad = beta[:, None] * (v_e[None, :] - v0[:, None]) ** 2 + fcas[:, None]
    dw = grad / truth.k
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        dw = dw + rng.normal(0.0, noise_sigma, dw.shape)
    return CalibrationGrid(v_comb, v_e, dw, noise_sigma)


def paper_scale_noise(casimir_curve, d, k: float = PAPER_K, weights=None) -> float:
    """Noise on delta_omega: a fixed fraction of the peak Casimir shift over d."""
    peak = np.max(np.abs(_weight_factor(weights) * _curve_values(casimir_curve, np.asarray(d))))
    return PAPER_NOISE_FRACTION * peak / k
