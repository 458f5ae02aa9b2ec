"""Finite-difference electrostatics of the unit cell.

The potential lives on the nodes of a square grid, periodic in x with the
cell pitch and closed by a grounded box in y. A node belongs to a conductor
when it lies inside or on the polygon, so flat faces aligned with the grid
sit exactly on node rows. The beam is held at 0 V and the electrode at V.

Grid edges cut by a conductor face carry conductance 1/theta, where
theta*h is the distance from the vacuum node to the true face along that
edge. The operator stays symmetric and the discrete energy sees the real
boundary position rather than a staircase.

Capacitance is taken from the discrete field energy of the vacuum regions
that touch both conductors. Regions that touch only one conductor and the
box are decoupled from the other body and carry no mutual capacitance.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .constants import EPS0
from .errors import ContactError, DomainError, SolverError
from .geometry import Axis, Polygon2D, UnitCellGeometry, facing_strips, min_separation, points_in_polygon
from .parallel import pmap

DEFAULT_SPACING = 5e-9
DEFAULT_MARGIN = 3e-6
RICHARDSON_BOUND = 0.02

FIELD_MAGIC = b"CFES"
FIELD_VERSION = 1
_HEADER = struct.Struct("<4sIIId8x")  # 32 bytes


@dataclass
class FieldSolution:
    """Node potentials of one solve, row index along y, column along x."""

    spacing: float
    potential: np.ndarray
    beam_mask: np.ndarray
    electrode_mask: np.ndarray
    box: tuple  # (width, height) in m
    y0: float
    voltage: float
    d: float
    mutual: np.ndarray = field(repr=False, default=None)  # vacuum nodes coupling both bodies
    residual: float = 0.0
    wx: np.ndarray = field(repr=False, default=None)  # edge (j, i)-(j, i+1) conductance
    wy: np.ndarray = field(repr=False, default=None)  # edge (j, i)-(j+1, i) conductance
    enclosed: bool = True  # no field line from the gap reaches the outer box

    @property
    def shape(self):
        return self.potential.shape

    def field_energy(self, mutual_only=True) -> float:
        """Energy per unit length (J/m): 0.5 eps0 sum over edges of w dphi^2."""
        phi = np.nan_to_num(self.potential)
        cond = self.beam_mask | self.electrode_mask
        sel = self.mutual if mutual_only else ~cond
        wx = np.ones(phi.shape) if self.wx is None else self.wx
        wy = np.ones((phi.shape[0] - 1, phi.shape[1])) if self.wy is None else self.wy
        total = 0.0
        # x edges wrap around the period
        dx = np.roll(phi, -1, axis=1) - phi
        ex = sel | np.roll(sel, -1, axis=1)
        total += float(np.sum(wx[ex] * dx[ex] ** 2))
        dy = phi[1:, :] - phi[:-1, :]
        ey = sel[1:, :] | sel[:-1, :]
        total += float(np.sum(wy[ey] * dy[ey] ** 2))
        if not mutual_only:
            # edges to the grounded box rows
            total += float(np.sum(phi[0, ~cond[0]] ** 2) + np.sum(phi[-1, ~cond[-1]] ** 2))
        return 0.5 * EPS0 * total

    def beam_charge_per_length(self) -> float:
        """Charge per unit length on the beam (C/m) from the discrete flux."""
        phi = np.nan_to_num(self.potential)
        beam = self.beam_mask
        ny, nx = phi.shape
        wx = np.ones((ny, nx)) if self.wx is None else self.wx
        wy = np.ones((ny - 1, nx)) if self.wy is None else self.wy
        right = np.roll(beam, -1, axis=1)
        phi_r = np.roll(phi, -1, axis=1)
        flux = np.sum(wx[beam & ~right] * phi_r[beam & ~right]) + np.sum(wx[right & ~beam] * phi[right & ~beam])
        lo, hi = beam[:-1], beam[1:]
        flux += np.sum(wy[lo & ~hi] * phi[1:][lo & ~hi]) + np.sum(wy[hi & ~lo] * phi[:-1][hi & ~lo])
        return -EPS0 * float(flux)

    def capacitance_per_length(self) -> float:
        """Mutual capacitance per unit length C' = -Q'_beam / V (F/m).

        For an enclosed gap this equals 2 W'/V^2 of the coupling field.
        """
        if self.voltage == 0:
            raise DomainError("capacitance undefined at V = 0")
        return -self.beam_charge_per_length() / self.voltage

    def to_bytes(self) -> bytes:
        """Binary dump: 32-byte header then float64 potentials, row-major."""
        ny, nx = self.potential.shape
        head = _HEADER.pack(FIELD_MAGIC, FIELD_VERSION, nx, ny, self.spacing * 1e9)
        return head + np.ascontiguousarray(self.potential, dtype="<f8").tobytes()


def read_field_dump(blob: bytes):
    """Inverse of :meth:`FieldSolution.to_bytes`; returns (spacing_m, potential)."""
    if len(blob) < _HEADER.size:
        raise ValueError("field dump shorter than its header")
    magic, version, nx, ny, spacing_nm = _HEADER.unpack_from(blob)
    if magic != FIELD_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != FIELD_VERSION:
        raise ValueError(f"unsupported field dump version {version}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if data.size != nx * ny:
        raise ValueError(f"expected {nx * ny} values, found {data.size}")
    return spacing_nm * 1e-9, data.reshape(ny, nx).copy()


# --------------------------------------------------------------------------- rasterization

def _on_boundary(poly: Polygon2D, pts, tol):
    a, b = poly.edges()
    hit = np.zeros(len(pts), dtype=bool)
    for i in range(len(a)):
        ab = b[i] - a[i]
        t = np.clip(((pts - a[i]) @ ab) / max(ab @ ab, 1e-300), 0.0, 1.0)
        proj = a[i] + t[:, None] * ab
        hit |= np.hypot(*(pts - proj).T) <= tol
    return hit


def rasterize(poly: Polygon2D, xs, ys, period, tol):
    """Mask of grid nodes inside or on ``poly`` (periodic images included)."""
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    x0, y0, x1, y1 = poly.bounds
    mask = np.zeros(len(pts), dtype=bool)
    for shift in (-period, 0.0, period):
        px = pts[:, 0] + shift
        near = (px >= x0 - tol) & (px <= x1 + tol) & (pts[:, 1] >= y0 - tol) & (pts[:, 1] <= y1 + tol)
        if not np.any(near):
            continue
        q = np.column_stack([px[near], pts[near, 1]])
        inside = points_in_polygon(poly, q) | _on_boundary(poly, q, tol)
        mask[np.flatnonzero(near)[inside]] = True
    return mask.reshape(len(ys), len(xs))


def _crossing_fraction(poly: Polygon2D, p, q, period):
    """Smallest s in (0, 1] with p + s (q - p) on the boundary of ``poly``."""
    a, b = poly.edges()
    dv = q - p
    best = np.ones(len(p))
    for shift in (-period, 0.0, period):
        for k in range(len(a)):
            e0 = a[k] + (shift, 0.0)
            ev = b[k] - a[k]
            den = dv[:, 0] * ev[1] - dv[:, 1] * ev[0]
            ok = np.abs(den) > 1e-30
            den = np.where(ok, den, 1.0)
            w = e0 - p
            s = (w[:, 0] * ev[1] - w[:, 1] * ev[0]) / den
            u = (w[:, 0] * dv[:, 1] - w[:, 1] * dv[:, 0]) / den
            hit = ok & (u >= -1e-12) & (u <= 1 + 1e-12) & (s > 0) & (s <= 1 + 1e-12)
            best = np.where(hit & (s < best), s, best)
    return np.clip(best, 1e-3, 1.0)


def _edge_weights(mask, poly, xs, ys, period):
    """Conductances 1/theta on grid edges leaving ``mask`` into vacuum."""
    ny, nx = mask.shape
    h = xs[1] - xs[0] if nx > 1 else ys[1] - ys[0]
    wx = np.ones((ny, nx))
    wy = np.ones((ny - 1, nx))
    X, Y = np.meshgrid(xs, ys)
    # x edges: node (j, i) to (j, i+1), the latter one period over at the seam
    nxt = np.roll(mask, -1, axis=1)
    for sel, sign in ((~mask & nxt, 1.0), (mask & ~nxt, -1.0)):
        j, i = np.nonzero(sel)
        if j.size == 0:
            continue
        xv = X[j, i] + (h if sign < 0 else 0.0)
        p = np.column_stack([xv, Y[j, i]])
        q = p + np.column_stack([np.full(j.size, sign * h), np.zeros(j.size)])
        wx[j, i] = 1.0 / _crossing_fraction(poly, p, q, period)
    for sel, sign in ((~mask[:-1] & mask[1:], 1.0), (mask[:-1] & ~mask[1:], -1.0)):
        j, i = np.nonzero(sel)
        if j.size == 0:
            continue
        yv = ys[j + (1 if sign < 0 else 0)]
        p = np.column_stack([xs[i], yv])
        q = p + np.column_stack([np.zeros(j.size), np.full(j.size, sign * h)])
        wy[j, i] = 1.0 / _crossing_fraction(poly, p, q, period)
    return wx, wy


_RASTERS: dict = {}


def _poly_raster(poly: Polygon2D, spacing: float, n_x: int, period: float):
    """Node mask and cut-edge weights of one polygon on its own row window.

    Returns (first row index, mask, wx, wy); the window has one empty row
    of padding above and below. Cached, so a polygon translated by whole
    rows is rasterized once.
    """
    key = (poly.vertices.tobytes(), spacing, n_x, period)
    hit = _RASTERS.get(key)
    if hit is not None:
        return hit
    y_lo, y_hi = poly.bounds[1], poly.bounds[3]
    j_lo = math.floor(y_lo / spacing) - 1
    j_hi = math.ceil(y_hi / spacing) + 1
    xs = np.arange(n_x) * spacing
    ys = np.arange(j_lo, j_hi + 1) * spacing
    mask = rasterize(poly, xs, ys, period, 1e-3 * spacing)
    wx, wy = _edge_weights(mask, poly, xs, ys, period)
    if len(_RASTERS) > 64:
        _RASTERS.clear()
    _RASTERS[key] = (j_lo, mask, wx, wy)
    return _RASTERS[key]


# --------------------------------------------------------------------------- solver

def _grid_index(value, spacing, what):
    k = value / spacing
    if abs(k - round(k)) > 1e-6:
        raise DomainError(f"{what} = {value:g} m is not a multiple of the grid spacing {spacing:g} m")
    return int(round(k))


def max_gap(g: UnitCellGeometry, d: float, resolution=5e-9) -> float:
    """Largest facing-strip gap at d, the scale used to size the box margin."""
    gaps = [facing_strips(g, d, ax, resolution).gap for ax in (Axis.X, Axis.Y)]
    gaps = np.concatenate(gaps)
    return float(np.max(gaps)) if gaps.size else 0.0


def solve_laplace(g: UnitCellGeometry, d: float, V: float, spacing: float = DEFAULT_SPACING,
                  margin: float | None = None, full_field: bool = True, check_spacing: bool = True,
                  ) -> FieldSolution:
    """Potential with the beam at 0 V, the electrode at V and a grounded outer box.

    With ``full_field=False`` only the vacuum regions coupling both bodies
    are solved; elsewhere the potential is NaN. Those regions are bounded
    by conductors, so their solution is the same either way.
    """
    if not spacing > 0:
        raise DomainError("spacing must be positive")
    n_x = _grid_index(g.period, spacing, "period")
    k_d = _grid_index(d, spacing, "displacement")
    sep = min_separation(g, d)
    if sep <= 0:
        raise ContactError(f"bodies touch at d = {d:g} m")
    if check_spacing and spacing > sep / 8 * (1 + 1e-9):
        raise DomainError(f"spacing {spacing:g} m exceeds min gap / 8 = {sep / 8:g} m")
    tight = margin is None and not full_field
    if margin is None:
        margin = max(DEFAULT_MARGIN, 5 * max_gap(g, d)) if full_field else 2 * spacing
    electrode = g.electrode_at(k_d * spacing)

    lo = min(g.beam_side.bounds[1], electrode.bounds[1]) - margin
    hi = max(g.beam_side.bounds[3], electrode.bounds[3]) + margin
    j0 = math.floor(lo / spacing)
    j1 = math.ceil(hi / spacing)
    ys = np.arange(j0, j1 + 1) * spacing
    ny = ys.size
    beam = np.zeros((ny, n_x), dtype=bool)
    elec = np.zeros((ny, n_x), dtype=bool)
    wx = np.ones((ny, n_x))
    wy = np.ones((ny - 1, n_x))
    for poly, rows_shift, target in ((g.beam_side, 0, beam), (g.electrode_side, k_d, elec)):
        jw, m, wxp, wyp = _poly_raster(poly, spacing, n_x, g.period)
        r0 = jw + rows_shift - j0
        r0c, r1c = max(r0, 0), min(r0 + m.shape[0], ny)
        if r1c <= r0c:
            continue
        src = slice(r0c - r0, r1c - r0)
        target[r0c:r1c] |= m[src]
        wx[r0c:r1c] = np.where(wxp[src] != 1.0, wxp[src], wx[r0c:r1c])
        e1 = min(r0 + m.shape[0] - 1, ny - 1)
        if e1 > r0c:
            wsrc = wyp[r0c - r0:e1 - r0]
            wy[r0c:e1] = np.where(wsrc != 1.0, wsrc, wy[r0c:e1])
    if np.any(beam & elec):
        raise ContactError(f"bodies overlap on the grid at d = {d:g} m")
    if np.any(beam & (np.roll(elec, 1, 1) | np.roll(elec, -1, 1))) or np.any(beam[1:] & elec[:-1]) \
            or np.any(beam[:-1] & elec[1:]):
        raise ContactError(f"gap at d = {d:g} m is not resolved by spacing {spacing:g} m")

    ny, nx = beam.shape
    cond = beam | elec
    vac = ~cond
    fixed = np.where(elec, float(V), 0.0)

    # vacuum graph for component labelling (periodic in x)
    idx = -np.ones((ny, nx), dtype=np.int64)
    n = int(vac.sum())
    idx[vac] = np.arange(n)
    right = np.roll(idx, -1, axis=1)
    rows = [idx[vac & (right >= 0)]]
    cols = [right[vac & (right >= 0)]]
    up = idx[1:, :]
    m = vac[:-1, :] & (up >= 0)
    rows.append(idx[:-1, :][m])
    cols.append(up[m])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = sparse.coo_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)

    def touching(mask):
        near = np.roll(mask, 1, 1) | np.roll(mask, -1, 1)
        near[1:] |= mask[:-1]
        near[:-1] |= mask[1:]
        hit = np.zeros(n_comp, dtype=bool)
        hit[np.unique(labels[idx[vac & near]])] = True
        return hit

    both = touching(beam) & touching(elec)
    comp_of = -np.ones((ny, nx), dtype=np.int64)
    comp_of[vac] = labels
    mutual = vac & (comp_of >= 0) & both[np.maximum(comp_of, 0)]
    enclosed = not (np.any(mutual[0]) or np.any(mutual[-1]))
    if not enclosed and tight:
        # the coupling field leaks to the box: a tight box would distort it
        return solve_laplace(g, d, V, spacing, max(DEFAULT_MARGIN, 5 * max_gap(g, d)), False, check_spacing)
    solve_mask = vac if full_field else mutual

    phi = np.full((ny, nx), np.nan)
    phi[cond] = fixed[cond]
    residual = _solve(solve_mask, fixed, cond, phi, V, wx, wy)
    return FieldSolution(spacing, phi, beam, elec, (g.period, (ny - 1) * spacing),
                         float(ys[0]), float(V), float(d), mutual, residual, wx, wy, enclosed)


def _solve(mask, fixed, cond, phi, V, wx, wy, max_refine=3):
    """Weighted five-point Laplace on the nodes in ``mask``, written into ``phi``."""
    ny, nx = mask.shape
    n = int(mask.sum())
    if n == 0:
        return 0.0
    idx = -np.ones((ny, nx), dtype=np.int64)
    idx[mask] = np.arange(n)
    jj, ii = np.nonzero(mask)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    b = np.zeros(n)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nj, ni = jj + dj, (ii + di) % nx
        inside = (nj >= 0) & (nj < ny)
        nj_c = np.clip(nj, 0, ny - 1)
        if dj == 0:
            w = wx[jj, ii] if di == 1 else wx[jj, ni]
        else:
            w = np.where(inside, wy[np.clip(np.minimum(jj, nj), 0, ny - 2), ii], 1.0)
        diag += w
        nbr = np.where(inside, idx[nj_c, ni], -1)
        unk = nbr >= 0
        rows.append(np.flatnonzero(unk))
        cols.append(nbr[unk])
        vals.append(-w[unk])
        # known neighbours: conductors; outside the grid is the grounded box
        known = inside & ~unk & cond[nj_c, ni]
        b[known] += w[known] * fixed[nj_c[known], ni[known]]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
    lu = splu(A)
    x = lu.solve(b)
    scale = max(abs(V), 1e-300)
    history = []
    for _ in range(max_refine + 1):
        res = b - A @ x
        history.append(float(np.max(np.abs(res))) if n else 0.0)
        if history[-1] < 1e-10 * scale or V == 0:
            break
        x += lu.solve(res)
    else:
        raise SolverError(f"residual {history[-1]:.3g} V above 1e-10 V-relative", history)
    phi[mask] = x
    return history[-1]


# --------------------------------------------------------------------------- forces

def mutual_capacitance(g, d, spacing=DEFAULT_SPACING, thickness=None, check_spacing=True):
    """Mutual capacitance (F) per unit cell, thickness times C'."""
    t = g.thickness if thickness is None else thickness
    sol = solve_laplace(g, d, 1.0, spacing, full_field=False, check_spacing=check_spacing)
    return t * sol.capacitance_per_length()


def electrostatic_force(g: UnitCellGeometry, d: float, V: float, spacing: float = DEFAULT_SPACING,
                        _cache=None) -> float:
    """y-force (N) on the electrode per cell, positive towards the beam.

    F = V^2/2 dC/dd with the derivative a central difference of step
    ``spacing``; the capacitance is solved once at unit voltage so F scales
    exactly as V^2.
    """
    cache = {} if _cache is None else _cache
    k = _grid_index(d, spacing, "displacement")
    sep = min_separation(g, d)
    if spacing > sep / 8 * (1 + 1e-9):
        raise DomainError(f"spacing {spacing:g} m exceeds min gap / 8 = {sep / 8:g} m")
    caps = []
    for kk in (k - 1, k + 1):
        if kk not in cache:
            cache[kk] = mutual_capacitance(g, kk * spacing, spacing, check_spacing=False)
        caps.append(cache[kk])
    return 0.5 * V**2 * (caps[1] - caps[0]) / (2 * spacing)


@dataclass
class BetaCurve:
    displacements: np.ndarray
    beta: np.ndarray
    error: np.ndarray | None = None  # Richardson estimate, N/m/V^2
    flagged: np.ndarray | None = None
    spacing: float = DEFAULT_SPACING
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.displacements = np.asarray(self.displacements, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.displacements.shape != self.beta.shape:
            raise ValueError("displacements and beta differ in length")
        if self.displacements.size > 1 and np.any(np.diff(self.displacements) <= 0):
            raise ValueError("displacements must be strictly increasing")
        n = self.beta.size
        self.error = np.zeros(n) if self.error is None else np.asarray(self.error, dtype=float)
        self.flagged = np.zeros(n, dtype=bool) if self.flagged is None else np.asarray(self.flagged, bool)

    def __call__(self, d):
        """Linear interpolation in d; outside the tabulated range is an error."""
        d = np.asarray(d, dtype=float)
        lo, hi = self.displacements[0], self.displacements[-1]
        tol = 1e-12 * max(abs(hi), 1e-9)
        if np.any(d < lo - tol) or np.any(d > hi + tol):
            raise DomainError(f"d outside the beta table [{lo:g}, {hi:g}] m")
        return np.interp(d, self.displacements, self.beta)

    def minimum(self) -> float:
        """Displacement of the beta minimum by parabolic interpolation."""
        from .calibration import parabolic_minimum
        return parabolic_minimum(self.displacements, self.beta)

    def to_csv(self, config_hash: str | None = None) -> str:
        lines = [f"# config_hash={config_hash}"] if config_hash else []
        lines.append("d_nm,beta_N_per_m_per_V2,richardson_err,flag")
        for d, b, e, f in zip(self.displacements, self.beta, self.error, self.flagged):
            lines.append(f"{d * 1e9:.6f},{b:.10e},{e:.4e},{int(f)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> BetaCurve:
        rows = [ln.split(",") for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or [h.strip() for h in rows[0][:2]] != ["d_nm", "beta_N_per_m_per_V2"]:
            raise ValueError("not a beta CSV: expected header 'd_nm, beta_N_per_m_per_V2'")
        data = rows[1:]
        d = np.array([float(r[0]) for r in data]) * 1e-9
        b = np.array([float(r[1]) for r in data])
        err = np.array([float(r[2]) for r in data]) if rows[0][2:3] else None
        flag = np.array([bool(int(r[3])) for r in data]) if rows[0][3:4] else None
        return cls(d, b, err, flag)


def _beta_at(g, d, V_ref, spacing, workers=1):
    ks = [_grid_index(x, spacing, "displacement") for x in d]
    for x in d:
        sep = min_separation(g, x)
        if spacing > sep / 8 * (1 + 1e-9):
            raise DomainError(f"spacing {spacing:g} m exceeds min gap / 8 = {sep / 8:g} m at d = {x:g} m")
    needed = sorted({k + s for k in ks for s in (-1, 1)})
    caps = pmap(lambda k: mutual_capacitance(g, k * spacing, spacing, check_spacing=False), needed, workers)
    cache = dict(zip(needed, caps))
    force = np.array([electrostatic_force(g, x, V_ref, spacing, cache) for x in d])
    h = d[1] - d[0]
    return np.gradient(force, h, edge_order=2) / V_ref**2


def beta_of_d(g: UnitCellGeometry, d_grid, V_ref: float = 0.1, spacing: float = DEFAULT_SPACING,
              richardson: bool = False, max_halvings: int = 2, bound: float = RICHARDSON_BOUND,
              workers: int = 1) -> BetaCurve:
    """beta(d) = F_e'(d)/V_ref^2 on a uniform grid of displacements.

    With ``richardson`` the sweep is repeated at half the spacing; the
    difference between the two levels bounds the discretization error of
    the finer one (first-order convergence assumed, the conservative case
    for staircased curved faces). Halving repeats up to ``max_halvings``
    times while any point exceeds ``bound`` relative to its own |beta|;
    points still above it are flagged.
    """
    d = np.asarray(d_grid, dtype=float)
    if d.size < 3:
        raise ValueError("need at least 3 displacements")
    steps = np.diff(d)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
        raise ValueError("displacement grid must be uniform and increasing")
    if V_ref == 0:
        raise DomainError("V_ref must be non-zero")
    beta = _beta_at(g, d, V_ref, spacing, workers)
    err = np.zeros_like(beta)
    flagged = np.zeros(beta.size, dtype=bool)
    h = spacing
    if richardson:
        for _ in range(max_halvings):
            fine = _beta_at(g, d, V_ref, h / 2, workers)
            err = np.abs(fine - beta)
            beta, h = fine, h / 2
            flagged = err > bound * np.abs(beta)
            if not np.any(flagged):
                break
    meta = {"V_ref": V_ref, "spacing_m": h, "richardson": richardson}
    return BetaCurve(d, beta, err, flagged, h, meta)


def margin_sensitivity(g: UnitCellGeometry, d: float, spacing: float = DEFAULT_SPACING,
                       margin: float | None = None) -> dict:
    """Relative change of C' when the outer box margin is doubled."""
    if margin is None:
        margin = max(DEFAULT_MARGIN, 5 * max_gap(g, d))
    c1 = solve_laplace(g, d, 1.0, spacing, margin=margin).capacitance_per_length()
    c2 = solve_laplace(g, d, 1.0, spacing, margin=2 * margin).capacitance_per_length()
    return {"margin_m": margin, "C_prime": c1, "C_prime_2x": c2, "relative_change": abs(c2 - c1) / c1}
