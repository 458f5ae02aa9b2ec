"""2D unit-cell polygons: construction, file I/O, offsetting, strip decomposition.

Conventions: SI lengths, polygons counterclockwise, the cell periodic in x
with pitch ``period``. The electrode side is translated by ``d`` along +y
(towards the beam side) before any interaction is evaluated.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal, InvalidOperation

import numpy as np

from .errors import ContactError, GeometryError, GeometryParseError

# vertices live on a 0.01 nm lattice so file round trips are exact
_QUANTUM = 1e-11


def quantize(value):
    return np.round(np.asarray(value, dtype=float) / _QUANTUM) * _QUANTUM


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        scale = max(abs(b[0] - a[0]), abs(b[1] - a[1]), abs(c[0] - a[0]), abs(c[1] - a[1]), 1e-300)
        return 0 if abs(v) <= 1e-12 * scale * scale else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_segment(p1, p2, q1)) or (o2 == 0 and on_segment(p1, p2, q2))
            or (o3 == 0 and on_segment(q1, q2, p1)) or (o4 == 0 and on_segment(q1, q2, p2)))


@dataclass(frozen=True)
class Polygon2D:
    """Simple polygon with counterclockwise vertices, shape (n, 2) in metres."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("a polygon needs at least 3 vertices of (x, y)")
        if _signed_area(v) < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def validate(self):
        if not self.area > 0:
            raise GeometryError("invariant violated: polygon area must be positive")
        if not self.is_simple():
            raise GeometryError("invariant violated: polygon must be simple (non-self-intersecting)")
        return self

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def perimeter(self) -> float:
        return float(np.sum(np.hypot(*(np.roll(self.vertices, -1, axis=0) - self.vertices).T)))

    @property
    def bounds(self):
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return lo[0], lo[1], hi[0], hi[1]

    def edges(self):
        """(start, end) vertex arrays, each shape (n, 2)."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def outward_normals(self):
        a, b = self.edges()
        t = b - a
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def is_simple(self) -> bool:
        v = self.vertices
        n = len(v)
        if len(np.unique(np.round(v / _QUANTUM).astype(np.int64), axis=0)) != n:
            return False
        # bounding-box prefilter keeps this cheap for arc-rich polygons
        a, b = self.edges()
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        overlap = ((lo[:, None, 0] <= hi[None, :, 0]) & (lo[None, :, 0] <= hi[:, None, 0])
                   & (lo[:, None, 1] <= hi[None, :, 1]) & (lo[None, :, 1] <= hi[:, None, 1]))
        ii, jj = np.nonzero(np.triu(overlap, k=2))
        for i, j in zip(ii, jj):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(a[i], b[i], a[j], b[j]):
                return False
        return True

    def translated(self, dx=0.0, dy=0.0) -> Polygon2D:
        return Polygon2D(self.vertices + np.array([dx, dy]))

    def mirrored_x(self, x0: float) -> Polygon2D:
        v = self.vertices.copy()
        v[:, 0] = 2 * x0 - v[:, 0]
        return Polygon2D(v[::-1])

    def canonical(self) -> Polygon2D:
        """Same polygon starting at its lowest-leftmost vertex."""
        v = self.vertices
        start = min(range(len(v)), key=lambda i: (v[i, 1], v[i, 0]))
        return Polygon2D(np.roll(v, -start, axis=0))

    def same_shape(self, other: Polygon2D, tol=0.0) -> bool:
        a, b = self.canonical().vertices, other.canonical().vertices
        return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol))


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class UnitCellGeometry:
    beam_side: Polygon2D
    electrode_side: Polygon2D
    period: float
    thickness: float = 2.23e-6
    alignment_displacement: float = 0.0
    tcell: TCellParams | None = field(default=None, compare=False)

    def validate(self):
        self.beam_side.validate()
        self.electrode_side.validate()
        if not self.period > 0:
            raise GeometryError("invariant violated: period must be positive")
        if not self.thickness > 0:
            raise GeometryError("invariant violated: thickness must be positive")
        if min_separation(self, 0.0) <= 0:
            raise GeometryError("invariant violated: polygons must be disjoint at d = 0")
        return self

    def electrode_at(self, d: float) -> Polygon2D:
        return self.electrode_side.translated(0.0, d)

    def offset(self, delta: float) -> UnitCellGeometry:
        """Both polygons grown (delta > 0) or shrunk along their normals.

        Edges lying on the cell boundaries x = 0 and x = period are cuts
        through a periodic body and stay in place.
        """
        return replace(
            self,
            beam_side=offset_polygon(self.beam_side, delta, fixed=_cut_edges(self.beam_side, self.period)),
            electrode_side=offset_polygon(self.electrode_side, delta,
                                          fixed=_cut_edges(self.electrode_side, self.period)),
            tcell=None,
        )


def _cut_edges(poly: Polygon2D, period: float):
    a, b = poly.edges()
    tol = 1e-6 * period
    on_left = (np.abs(a[:, 0]) < tol) & (np.abs(b[:, 0]) < tol)
    on_right = (np.abs(a[:, 0] - period) < tol) & (np.abs(b[:, 0] - period) < tol)
    return on_left | on_right


@dataclass(frozen=True)
class TCellParams:
    """Dimensions of the T-protrusion unit cell (metres).

    The defaults reproduce the qualitative shape of the measured curves and
    the 772 nm alignment displacement; they are not the device's design values.
    ``cap_width`` is the beam-side cap; the electrode cap fills the rest of
    the period minus two tip gaps. ``frame_setback`` is the depth of each
    supporting frame slab behind the protrusion roots.
    """

    period: float = 2.0e-6
    cap_width: float = 935e-9
    cap_height: float = 250e-9
    stem_width: float = 300e-9
    stem_height: float = 450e-9
    frame_setback: float = 500e-9
    tip_gap_at_alignment: float = 65e-9
    alignment_displacement: float = 772e-9
    corner_radius: float = 100e-9
    thickness: float = 2.23e-6
    arc_segments: int = 8

    @property
    def electrode_cap_width(self) -> float:
        return self.period - self.cap_width - 2 * self.tip_gap_at_alignment

    def validate(self):
        lengths = ("period", "cap_width", "cap_height", "stem_width", "stem_height",
                   "frame_setback", "tip_gap_at_alignment", "alignment_displacement", "thickness")
        for name in lengths:
            if not getattr(self, name) > 0:
                raise GeometryError(f"invariant violated: {name} must be positive")
        if self.corner_radius < 0:
            raise GeometryError("invariant violated: corner_radius must be >= 0")
        if not self.cap_width > self.stem_width:
            raise GeometryError("invariant violated: cap_width must exceed stem_width")
        if not self.electrode_cap_width > self.stem_width:
            raise GeometryError("electrode cap narrower than its stem: tip gap or cap width too large")
        if 2 * self.corner_radius >= min(self.cap_height, (self.cap_width - self.stem_width)):
            raise GeometryError("corner_radius too large for the cap")
        return self


def round_corners(vertices, indices, radius, segments=8):
    """Replace convex corners ``indices`` by circular arcs of ``radius``."""
    if radius <= 0:
        return np.asarray(vertices, dtype=float)
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    out = []
    targets = set(int(i) % n for i in indices)
    for i in range(n):
        if i not in targets:
            out.append(v[i])
            continue
        p, c, q = v[i - 1], v[i], v[(i + 1) % n]
        u1 = (p - c) / np.linalg.norm(p - c)
        u2 = (q - c) / np.linalg.norm(q - c)
        half = 0.5 * math.acos(np.clip(np.dot(u1, u2), -1.0, 1.0))
        dist = radius / math.tan(half)
        bis = (u1 + u2) / np.linalg.norm(u1 + u2)
        center = c + bis * radius / math.sin(half)
        t1, t2 = c + u1 * dist, c + u2 * dist
        a1 = math.atan2(t1[1] - center[1], t1[0] - center[0])
        a2 = math.atan2(t2[1] - center[1], t2[0] - center[0])
        sweep = (a2 - a1 + math.pi) % (2 * math.pi) - math.pi
        for k in range(segments + 1):
            ang = a1 + sweep * k / segments
            out.append(center + radius * np.array([math.cos(ang), math.sin(ang)]))
    return np.array(out)


def make_t_cell(p: TCellParams | None = None) -> UnitCellGeometry:
    """Beam and electrode T-protrusion polygons for one period.

    The beam T hangs from its frame centred at x = period/2; the electrode T
    points up and is split across the cell edges. At d =
    ``alignment_displacement`` the caps sit side by side, separated laterally
    by ``tip_gap_at_alignment`` on each side.
    """
    p = (p or TCellParams()).validate()
    P, fs, sh, ch = p.period, p.frame_setback, p.stem_height, p.cap_height
    sw, cw, we = p.stem_width, p.cap_width, p.electrode_cap_width
    r, nseg = p.corner_radius, p.arc_segments

    top_e = fs + sh + ch  # electrode cap top at d = 0
    cap_top_b = top_e + p.alignment_displacement  # beam cap face towards its stem
    frame_b = cap_top_b + sh

    electrode = np.array([
        (0, 0), (P, 0), (P, top_e), (P - we / 2, top_e), (P - we / 2, fs + sh),
        (P - sw / 2, fs + sh), (P - sw / 2, fs), (sw / 2, fs), (sw / 2, fs + sh),
        (we / 2, fs + sh), (we / 2, top_e), (0, top_e),
    ])
    electrode = round_corners(electrode, [3, 4, 9, 10], r, nseg)

    c = P / 2
    beam = np.array([
        (0, frame_b), (c - sw / 2, frame_b), (c - sw / 2, cap_top_b), (c - cw / 2, cap_top_b),
        (c - cw / 2, cap_top_b - ch), (c + cw / 2, cap_top_b - ch), (c + cw / 2, cap_top_b),
        (c + sw / 2, cap_top_b), (c + sw / 2, frame_b), (P, frame_b), (P, frame_b + fs),
        (0, frame_b + fs),
    ])
    beam = round_corners(beam, [3, 4, 5, 6], r, nseg)

    g = UnitCellGeometry(
        beam_side=Polygon2D(quantize(beam)),
        electrode_side=Polygon2D(quantize(electrode)),
        period=float(quantize(P)),
        thickness=p.thickness,
        alignment_displacement=float(quantize(p.alignment_displacement)),
        tcell=p,
    )
    try:
        return g.validate()
    except GeometryError as exc:
        raise GeometryError(f"T-cell construction failed: {exc}") from None


def parallel_plates(width: float, gap: float, period: float | None = None, depth: float = 200e-9,
                    thickness: float = 2.23e-6) -> UnitCellGeometry:
    """Two flat plates of ``width`` facing across ``gap`` along y.

    With ``period`` equal to ``width`` (the default) the plates fill the
    cell and the periodic array has no fringes.
    """
    period = width if period is None else period
    if not (width > 0 and gap > 0 and depth > 0) or width > period:
        raise GeometryError("plates need positive width, gap, depth and width <= period")
    x0 = 0.5 * (period - width)
    electrode = [(x0, 0), (x0 + width, 0), (x0 + width, depth), (x0, depth)]
    beam = [(x0, depth + gap), (x0 + width, depth + gap), (x0 + width, 2 * depth + gap),
            (x0, 2 * depth + gap)]
    return UnitCellGeometry(
        beam_side=Polygon2D(quantize(beam)),
        electrode_side=Polygon2D(quantize(electrode)),
        period=float(quantize(period)),
        thickness=thickness,
    ).validate()


def _tile_polygon(poly: Polygon2D, period: float, n: int) -> Polygon2D:
    cut = _cut_edges(poly, period)
    v = poly.vertices
    m = len(v)
    a, _ = poly.edges()
    left = [i for i in np.nonzero(cut)[0] if a[i, 0] < 0.5 * period]
    right = [i for i in np.nonzero(cut)[0] if a[i, 0] > 0.5 * period]
    if len(left) != 1 or len(right) != 1:
        raise GeometryError("tiling needs exactly one cut edge on each cell boundary")
    li, ri = left[0], right[0]

    def chain(start, stop):
        out, i = [], start
        while True:
            out.append(v[i % m])
            if i % m == stop:
                return np.array(out)
            i += 1

    lower = chain(li + 1, ri)  # left boundary -> right boundary
    upper = chain(ri + 1, li)  # right boundary -> left boundary
    pts = [lower + (k * period, 0.0) for k in range(n)]
    pts += [upper + (k * period, 0.0) for k in range(n - 1, -1, -1)]
    out = [pts[0][0]]
    for seg in pts:
        for p in seg:
            if np.max(np.abs(p - out[-1])) > 1e-6 * period:
                out.append(p)
    return Polygon2D(quantize(np.array(out)))


def tile_cell(g: UnitCellGeometry, n: int) -> UnitCellGeometry:
    """``n`` copies of a unit cell joined into one cell of period ``n * period``.

    Both bodies must be periodic strips, i.e. cut by each cell boundary
    exactly once.
    """
    if n < 1:
        raise GeometryError("n must be >= 1")
    if n == 1:
        return g
    return UnitCellGeometry(
        beam_side=_tile_polygon(g.beam_side, g.period, n),
        electrode_side=_tile_polygon(g.electrode_side, g.period, n),
        period=float(quantize(n * g.period)),
        thickness=g.thickness,
        alignment_displacement=g.alignment_displacement,
    ).validate()


# --------------------------------------------------------------------------- offsetting

def offset_polygon(poly: Polygon2D, delta: float, miter_limit: float = 2.0, fixed=None) -> Polygon2D:
    """Move every edge by ``delta`` along its outward normal.

    Outer corners are mitred; where the miter would exceed ``miter_limit``
    times ``|delta|`` the corner is bevelled. Edges flagged in ``fixed`` do
    not move. Raises :class:`GeometryError` if the result is not simple.
    """
    if delta == 0:
        return poly
    v = poly.vertices
    n = len(v)
    normals = poly.outward_normals()
    shifts = np.full(n, float(delta))
    if fixed is not None:
        shifts[np.asarray(fixed, dtype=bool)] = 0.0
    a, b = poly.edges()
    pa = a + normals * shifts[:, None]
    pb = b + normals * shifts[:, None]
    out = []
    for i in range(n):
        j = i - 1  # edge entering vertex i
        d1 = pb[j] - pa[j]
        d2 = pb[i] - pa[i]
        cross = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(cross) < 1e-18 * max(np.dot(d1, d1), 1e-300):
            out.append(0.5 * (pb[j] + pa[i]))
            continue
        s = ((pa[i][0] - pa[j][0]) * d2[1] - (pa[i][1] - pa[j][1]) * d2[0]) / cross
        miter = pa[j] + s * d1
        convex = cross > 0
        outer = (convex and max(shifts[j], shifts[i]) > 0) or (not convex and min(shifts[j], shifts[i]) < 0)
        miter_len = np.linalg.norm(miter - v[i])
        if outer and miter_len > miter_limit * abs(delta):
            out.append(pb[j])
            out.append(pa[i])
        else:
            out.append(miter)
    result = Polygon2D(quantize(np.array(out)))
    if result.area <= 0 or not result.is_simple():
        raise GeometryError(f"offset by {delta:g} m collapses the polygon topology")
    return result


# --------------------------------------------------------------------------- distances

def _point_segment_dist(p, a, b):
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300), 0, 1)
    proj = a + ab * t[:, None]
    return np.hypot(*(p - proj).T)


def _poly_distance(p: Polygon2D, q: Polygon2D) -> float:
    best = math.inf
    for s, t in ((p, q), (q, p)):
        a, b = t.edges()
        for vert in s.vertices:
            pts = np.broadcast_to(vert, a.shape)
            best = min(best, float(np.min(_point_segment_dist(pts, a, b))))
    return best


def points_in_polygon(poly: Polygon2D, pts) -> np.ndarray:
    """Even-odd test for an array of points, shape (m, 2)."""
    pts = np.asarray(pts, dtype=float)
    a, b = poly.edges()
    x, y = pts[:, 0:1], pts[:, 1:2]
    straddle = (a[None, :, 1] <= y) != (b[None, :, 1] <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (b[None, :, 1] - a[None, :, 1])
    return (np.sum(straddle & (x < xc), axis=1) % 2) == 1


def _overlaps(p: Polygon2D, q: Polygon2D) -> bool:
    """True if the interiors intersect (edge crossing or containment)."""
    if points_in_polygon(p, q.vertices[:1])[0] or points_in_polygon(q, p.vertices[:1])[0]:
        return True
    a1, b1 = p.edges()
    a2, b2 = q.edges()
    lo1, hi1 = np.minimum(a1, b1), np.maximum(a1, b1)
    lo2, hi2 = np.minimum(a2, b2), np.maximum(a2, b2)
    cand = ((lo1[:, None, 0] <= hi2[None, :, 0]) & (lo2[None, :, 0] <= hi1[:, None, 0])
            & (lo1[:, None, 1] <= hi2[None, :, 1]) & (lo2[None, :, 1] <= hi1[:, None, 1]))
    for i, j in zip(*np.nonzero(cand)):
        if _segments_intersect(a1[i], b1[i], a2[j], b2[j]):
            return True
    return False


def min_separation(g: UnitCellGeometry, d: float) -> float:
    """Smallest beam-electrode distance at displacement d, periodic images included.

    Returns 0 when the bodies touch or overlap.
    """
    e = g.electrode_at(d)
    best = math.inf
    for shift in (-g.period, 0.0, g.period):
        img = e.translated(shift, 0.0)
        bx0, by0, bx1, by1 = g.beam_side.bounds
        ex0, ey0, ex1, ey1 = img.bounds
        if ex0 > bx1 + best or bx0 > ex1 + best or ey0 > by1 + best or by0 > ey1 + best:
            continue
        if _overlaps(g.beam_side, img):
            return 0.0
        dist = _poly_distance(g.beam_side, img)
        if dist < best:
            best = dist
    return best


def tip_gap(g: UnitCellGeometry, d: float | None = None) -> float:
    """Minimum separation at the alignment displacement (or at ``d``)."""
    return min_separation(g, g.alignment_displacement if d is None else d)


# --------------------------------------------------------------------------- strips

class Axis(str, enum.Enum):
    X = "x"
    Y = "y"


@dataclass(frozen=True)
class StripDecomposition:
    """Facing parallel-plate strips.

    For axis Y, ``position`` is the strip centre in x and the strips face
    along y; ``sign`` is +1 when the electrode lies below the beam across the
    gap (attraction pulls the electrode towards +y). For axis X, ``position``
    is the centre in y.
    """

    axis: Axis
    position: np.ndarray
    width: np.ndarray
    gap: np.ndarray
    sign: np.ndarray
    resolution: float

    def __len__(self):
        return len(self.gap)

    @property
    def total_width(self) -> float:
        return float(np.sum(self.width))


_BEAM, _ELECTRODE = 0, 1


def _body_edges(poly: Polygon2D, body: int, shifts, swap: bool):
    """Edges in (scan, ray) coordinates with the outward normal's ray component."""
    out = []
    for sx in shifts:
        a, b = poly.translated(sx, 0.0).edges()
        n = poly.outward_normals()
        if swap:  # scan along y, rays along x
            out.append(np.column_stack([a[:, 1], a[:, 0], b[:, 1], b[:, 0], n[:, 0],
                                        np.full(len(a), body)]))
        else:
            out.append(np.column_stack([a[:, 0], a[:, 1], b[:, 0], b[:, 1], n[:, 1],
                                        np.full(len(a), body)]))
    return np.vstack(out)


def _partition(breaks, lo, hi, resolution):
    """Bins between consecutive breakpoints, each no wider than ``resolution``."""
    pts = np.unique(np.concatenate([[lo, hi], breaks[(breaks > lo) & (breaks < hi)]]))
    lengths = np.diff(pts)
    keep = lengths > 1e-15
    starts, lengths = pts[:-1][keep], lengths[keep]
    counts = np.maximum(1, np.ceil(lengths / resolution - 1e-9).astype(int))
    widths = np.repeat(lengths / counts, counts)
    idx = np.concatenate([np.arange(c) for c in counts])
    centers = np.repeat(starts, counts) + (idx + 0.5) * widths
    return centers, widths


def facing_strips(g: UnitCellGeometry, d: float, axis, resolution: float = 1e-9,
                  angle_threshold_deg: float = 45.0) -> StripDecomposition:
    """Decompose the facing surfaces into parallel-plate strips.

    Rays are cast through the centres of bins whose edges include every
    vertex coordinate, so no ray grazes a vertex and the strip sums vary
    smoothly with ``d``. Only surface elements whose normals lie within
    ``angle_threshold_deg`` of the ray direction on both sides are kept.
    Raises :class:`ContactError` if the bodies overlap.
    """
    axis = Axis(axis)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    swap = axis is Axis.X
    P = g.period
    elec = g.electrode_at(d)
    shifts = (-P, 0.0, P)
    edges = np.vstack([_body_edges(g.beam_side, _BEAM, shifts, swap),
                       _body_edges(elec, _ELECTRODE, shifts, swap)])
    s0, r0, s1, r1, nr, body = edges.T

    if swap:
        lo = min(g.beam_side.bounds[1], elec.bounds[1])
        hi = max(g.beam_side.bounds[3], elec.bounds[3])
    else:
        lo, hi = 0.0, P
    centers, widths = _partition(np.concatenate([s0, s1]), lo, hi, resolution)

    s = centers[:, None]
    hit = ((s0 <= s) & (s < s1)) | ((s1 <= s) & (s < s0))
    with np.errstate(divide="ignore", invalid="ignore"):
        rc = r0 + (s - s0) * (r1 - r0) / (s1 - s0)
    rc = np.where(hit, rc, np.inf)
    order = np.argsort(rc, axis=1, kind="stable")
    rc = np.take_along_axis(rc, order, axis=1)
    valid = np.isfinite(rc)
    body_s = np.where(valid, body[order], -1)
    nr_s = nr[order]

    # entry/exit per body from crossing parity
    state = np.zeros(rc.shape, dtype=int)
    inside = []
    for b in (_BEAM, _ELECTRODE):
        mine = body_s == b
        rank = np.cumsum(mine, axis=1) - 1
        step = np.where(mine, np.where(rank % 2 == 0, 1, -1), 0)
        state += np.where(mine, step, 0)
        inside.append(np.cumsum(step, axis=1))
    if np.any((inside[0] > 0) & (inside[1] > 0)):
        raise ContactError(f"beam and electrode overlap at d = {d:.4g} m")

    is_exit = state == -1
    is_entry = state == 1
    pair = (is_exit[:, :-1] & is_entry[:, 1:] & (body_s[:, :-1] != body_s[:, 1:])
            & (body_s[:, :-1] >= 0) & (body_s[:, 1:] >= 0))
    rows, k = np.nonzero(pair)
    lower_r, upper_r = rc[rows, k], rc[rows, k + 1]
    gaps = upper_r - lower_r
    if np.any(gaps <= 0):
        raise ContactError(f"beam and electrode touch at d = {d:.4g} m")
    cos_t = math.cos(math.radians(angle_threshold_deg))
    facing = (np.abs(nr_s[rows, k]) >= cos_t - 1e-12) & (np.abs(nr_s[rows, k + 1]) >= cos_t - 1e-12)
    sign = np.where(body_s[rows, k] == _ELECTRODE, 1.0, -1.0)
    keep = facing
    if swap:
        mid = 0.5 * (lower_r + upper_r)
        keep &= (mid >= 0) & (mid < P)
    rows, gaps, sign = rows[keep], gaps[keep], sign[keep]
    return StripDecomposition(axis, centers[rows], widths[rows], gaps, sign, resolution)


# --------------------------------------------------------------------------- file I/O

def _nm(value: float) -> str:
    q = int(round(value / _QUANTUM))
    sign = "-" if q < 0 else ""
    q = abs(q)
    return f"{sign}{q // 100}.{q % 100:02d}"


def _poly_json(poly: Polygon2D) -> str:
    pts = ", ".join(f"[{_nm(x)}, {_nm(y)}]" for x, y in poly.canonical().vertices)
    return f"[{pts}]"


def save_geometry(g: UnitCellGeometry, unit_overrides=None) -> str:
    """Canonical JSON text; lengths in nm with 0.01 nm resolution."""
    lines = [
        "{",
        f'  "period_nm": {_nm(g.period)},',
        f'  "thickness_nm": {_nm(g.thickness)},',
        f'  "alignment_displacement_nm": {_nm(g.alignment_displacement)},',
    ]
    if g.tcell is not None:
        tc = {k: v for k, v in asdict(g.tcell).items()}
        parts = []
        for k, v in tc.items():
            parts.append(f'"{k}": {v}' if k == "arc_segments" else f'"{k}_nm": {_nm(v)}')
        lines.append('  "tcell": {' + ", ".join(parts) + "},")
    if unit_overrides:
        items = ", ".join(f'{{"index": {int(o["index"])}, "tip_gap_nm": {_nm(o["tip_gap_nm"] * 1e-9)}}}'
                          for o in unit_overrides)
        lines.append(f'  "unit_overrides": [{items}],')
    lines.append(f'  "beam_side": {_poly_json(g.beam_side)},')
    lines.append(f'  "electrode_side": {_poly_json(g.electrode_side)}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _field_line(text: str, key: str):
    for i, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return i
    return None


def _exact_m(value, key, text):
    try:
        q = Decimal(str(value)) * 100
    except (InvalidOperation, ValueError):
        raise GeometryParseError("not a number", line=_field_line(text, key), field=key) from None
    return float(int(q.to_integral_value())) * _QUANTUM


def _parse_poly(data, key, text) -> Polygon2D:
    raw = data.get(key)
    if not isinstance(raw, list) or not all(isinstance(p, list) and len(p) == 2 for p in raw):
        raise GeometryParseError("expected a list of [x, y] pairs", line=_field_line(text, key), field=key)
    verts = np.array([[_exact_m(x, key, text), _exact_m(y, key, text)] for x, y in raw])
    try:
        return Polygon2D(verts)
    except GeometryError as exc:
        raise GeometryParseError(str(exc), line=_field_line(text, key), field=key) from None


def _parse(text: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GeometryParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise GeometryParseError("top level must be an object")
    for key in ("period_nm", "beam_side", "electrode_side"):
        if key not in data:
            raise GeometryParseError("missing required field", field=key)
    tcell = None
    if "tcell" in data:
        raw = data["tcell"]
        kwargs = {}
        for k, v in raw.items():
            if k == "arc_segments":
                kwargs[k] = int(v)
            elif k.endswith("_nm"):
                kwargs[k[:-3]] = _exact_m(v, "tcell", text)
            else:
                raise GeometryParseError(f"unknown tcell key {k!r}", line=_field_line(text, "tcell"), field="tcell")
        tcell = TCellParams(**kwargs)
    g = UnitCellGeometry(
        beam_side=_parse_poly(data, "beam_side", text),
        electrode_side=_parse_poly(data, "electrode_side", text),
        period=_exact_m(data["period_nm"], "period_nm", text),
        thickness=_exact_m(data.get("thickness_nm", 2230), "thickness_nm", text),
        alignment_displacement=_exact_m(data.get("alignment_displacement_nm", 0), "alignment_displacement_nm", text),
        tcell=tcell,
    )
    overrides = data.get("unit_overrides", [])
    if not isinstance(overrides, list):
        raise GeometryParseError("expected a list", line=_field_line(text, "unit_overrides"), field="unit_overrides")
    return g, overrides, text


def load_geometry(text: str) -> UnitCellGeometry:
    """Parse and validate a geometry file."""
    g, _, _ = _parse(text)
    return g.validate()


def load_unit_geometries(text: str) -> list[UnitCellGeometry]:
    """One geometry per ``unit_overrides`` entry (the template alone if none).

    Overrides regenerate the cell from the file's ``tcell`` block with a new
    tip gap, so files carrying overrides must include that block.
    """
    g, overrides, text = _parse(text)
    g.validate()
    if not overrides:
        return [g]
    if g.tcell is None:
        raise GeometryParseError("unit_overrides require a tcell block", field="unit_overrides")
    out = []
    for i, o in enumerate(sorted(overrides, key=lambda o: int(o.get("index", -1)))):
        if "tip_gap_nm" not in o or "index" not in o:
            raise GeometryParseError(f"override {i} needs index and tip_gap_nm",
                                     line=_field_line(text, "unit_overrides"), field="unit_overrides")
        gap = _exact_m(o["tip_gap_nm"], "unit_overrides", text)
        out.append(make_t_cell(replace(g.tcell, tip_gap_at_alignment=gap)))
    return out
