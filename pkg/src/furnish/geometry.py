"""Exact 2D primitives for furniture footprints and rectilinear rooms.

All footprints in this package are axis-aligned rectangles and all rooms are
rectilinear polygons, so every boolean operation here reduces to exact
axis-aligned interval arithmetic.  The ``Polygon`` type itself is general;
``intersection_area`` additionally handles convex operands via half-plane
clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec2 = np.ndarray  # shape (2,), float64

AREA_EPS = 1e-9  # overlap / containment tolerance in m^2
_COORD_EPS = 1e-9


class GeometryError(ValueError):
    """Invalid geometric input (degenerate polygon, bad sweep, ...)."""


def vec2(x: float, y: float) -> Vec2:
    return np.array([x, y], dtype=float)


def rot90(v: Vec2, k: int = 1) -> Vec2:
    """Rotate a vector counterclockwise by 90 degrees, k times (exact)."""
    x, y = float(v[0]), float(v[1])
    for _ in range(k % 4):
        x, y = -y, x
    return vec2(x, y)


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace signed area; positive for counterclockwise order."""
    pts = vertices.tolist() if isinstance(vertices, np.ndarray) else list(vertices)
    total = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


class Polygon:
    """Simple polygon with counterclockwise vertices (meters)."""

    __slots__ = ("vertices", "_area", "_bounds")

    def __init__(self, vertices) -> None:
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs >= 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        area = signed_area(v)
        if area <= 0.0:
            raise GeometryError("polygon must be counterclockwise with positive area")
        self.vertices = v
        self._area = area
        self._bounds: tuple[float, float, float, float] | None = None

    @property
    def area(self) -> float:
        return self._area

    @property
    def centroid(self) -> Vec2:
        """Area centroid (shoelace formula)."""
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        cross = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
        a = 0.5 * float(np.sum(cross))
        cx = float(np.sum((v[:, 0] + nxt[:, 0]) * cross)) / (6.0 * a)
        cy = float(np.sum((v[:, 1] + nxt[:, 1]) * cross)) / (6.0 * a)
        return vec2(cx, cy)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax), cached."""
        if self._bounds is None:
            v = self.vertices
            self._bounds = (
                float(v[:, 0].min()),
                float(v[:, 1].min()),
                float(v[:, 0].max()),
                float(v[:, 1].max()),
            )
        return self._bounds

    def __repr__(self) -> str:  # pragma: no cover
        return f"Polygon({self.vertices.tolist()})"


def rect(cx: float, cy: float, width: float, depth: float) -> Polygon:
    """Axis-aligned rectangle centered at (cx, cy)."""
    if width <= 0 or depth <= 0:
        raise GeometryError("rectangle dimensions must be positive")
    hw, hd = width / 2.0, depth / 2.0
    return Polygon(
        [
            [cx - hw, cy - hd],
            [cx + hw, cy - hd],
            [cx + hw, cy + hd],
            [cx - hw, cy + hd],
        ]
    )


def rect_from_bounds(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    if x1 <= x0 or y1 <= y0:
        raise GeometryError("degenerate rectangle bounds")
    return Polygon([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


def rotate(poly: Polygon, k: int) -> Polygon:
    """Counterclockwise rotation about the origin by 90 degrees, k times."""
    v = poly.vertices.copy()
    for _ in range(k % 4):
        v = np.column_stack([-v[:, 1], v[:, 0]])
    return Polygon(v)


def transform(x: Vec2, k: int, poly: Polygon) -> Polygon:
    """Rigid-body placement: rotate by 90*k degrees, then translate by x."""
    return Polygon(rotate(poly, k).vertices + np.asarray(x, dtype=float))


def is_rectilinear(poly: Polygon) -> bool:
    """True when every edge is axis-parallel (exact comparison)."""
    pts = poly.vertices.tolist()
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        if x0 != x1 and y0 != y1:
            return False
    return True


def is_convex(poly: Polygon) -> bool:
    v = poly.vertices
    a = np.roll(v, -1, axis=0) - v
    b = np.roll(a, -1, axis=0)
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return bool(np.all(cross >= -_COORD_EPS))


def _cross_section(vertices: np.ndarray, y: float) -> list[tuple[float, float]]:
    """Interior x-intervals of a rectilinear polygon at height y.

    y must not coincide with a horizontal edge level.
    """
    xs = []
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        if x0 == x1 and min(y0, y1) < y < max(y0, y1):
            xs.append(x0)
    xs.sort()
    return [(xs[j], xs[j + 1]) for j in range(0, len(xs), 2)]


def decompose_rectilinear(poly: Polygon) -> np.ndarray:
    """Split a rectilinear polygon into disjoint rects, one row (x0,y0,x1,y1) each."""
    if not is_rectilinear(poly):
        raise GeometryError("polygon is not rectilinear")
    v = poly.vertices
    levels = np.unique(v[:, 1])
    out = []
    for ylo, yhi in zip(levels[:-1], levels[1:]):
        mid = 0.5 * (ylo + yhi)
        for x0, x1 in _cross_section(v, mid):
            out.append((x0, ylo, x1, yhi))
    return np.array(out, dtype=float).reshape(-1, 4)


def _box_overlap(a: np.ndarray, b: np.ndarray) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return w * h if (w > 0 and h > 0) else 0.0


def _clip_half_plane(points: list[np.ndarray], a: np.ndarray, b: np.ndarray) -> list[np.ndarray]:
    """Keep the part of the polygon on the left of directed edge a->b."""
    out: list[np.ndarray] = []
    n = len(points)
    for i in range(n):
        p, q = points[i], points[(i + 1) % n]
        sp = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        sq = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])
        if sp >= 0:
            out.append(p)
        if (sp > 0 and sq < 0) or (sp < 0 and sq > 0):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return out


def _convex_clip_area(subject: Polygon, clip: Polygon) -> float:
    pts = [p for p in subject.vertices]
    cv = clip.vertices
    for i in range(len(cv)):
        pts = _clip_half_plane(pts, cv[i], cv[(i + 1) % len(cv)])
        if len(pts) < 3:
            return 0.0
    arr = np.array(pts)
    return abs(signed_area(arr))


def intersection_area(p: Polygon, q: Polygon) -> float:
    """Area of the intersection of two polygons.

    Exact for rectilinear operands; convex operands fall back to
    half-plane clipping.
    """
    pb, qb = p.bounds, q.bounds
    if pb[2] <= qb[0] or qb[2] <= pb[0] or pb[3] <= qb[1] or qb[3] <= pb[1]:
        return 0.0
    if _is_axis_rect(p) is not None and _is_axis_rect(q) is not None:
        return (min(pb[2], qb[2]) - max(pb[0], qb[0])) * (min(pb[3], qb[3]) - max(pb[1], qb[1]))
    if is_rectilinear(p) and is_rectilinear(q):
        total = 0.0
        for a in decompose_rectilinear(p):
            for b in decompose_rectilinear(q):
                total += _box_overlap(a, b)
        return total
    if is_convex(q):
        return _convex_clip_area(p, q)
    if is_convex(p):
        return _convex_clip_area(q, p)
    raise GeometryError("intersection of two non-convex, non-rectilinear polygons is unsupported")


def contains(room_poly: Polygon, poly: Polygon) -> bool:
    """Closed containment: boundary contact counts as inside."""
    return intersection_area(room_poly, poly) >= abs(poly.area) - AREA_EPS


def _is_axis_rect(poly: Polygon) -> tuple[float, float, float, float] | None:
    if len(poly.vertices) != 4 or not is_rectilinear(poly):
        return None
    b = poly.bounds
    if abs((b[2] - b[0]) * (b[3] - b[1]) - poly.area) > AREA_EPS:
        return None
    return b


def sweep_strip(poly: Polygon, direction: Vec2, offset: float) -> Polygon:
    """Exterior clearance strip swept from one face of an axis-aligned rect.

    The strip abuts the face whose outward normal is ``direction`` and
    extends ``offset`` meters outward; the footprint itself is excluded.
    """
    if offset <= 0:
        raise GeometryError("sweep offset must be positive")
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9 or (d[0] != 0.0 and d[1] != 0.0):
        raise GeometryError("sweep direction must be a unit axis vector")
    b = _is_axis_rect(poly)
    if b is None:
        raise GeometryError("sweep_strip requires an axis-aligned rectangle")
    x0, y0, x1, y1 = b
    if d[0] > 0:
        return rect_from_bounds(x1, y0, x1 + offset, y1)
    if d[0] < 0:
        return rect_from_bounds(x0 - offset, y0, x0, y1)
    if d[1] > 0:
        return rect_from_bounds(x0, y1, x1, y1 + offset)
    return rect_from_bounds(x0, y0 - offset, x1, y0)


def union_area(boxes: np.ndarray) -> float:
    """Union area of axis-aligned boxes (rows of x0,y0,x1,y1), by coordinate compression."""
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
    boxes = boxes[(boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])]
    if len(boxes) == 0:
        return 0.0
    xs = np.unique(boxes[:, [0, 2]])
    ys = np.unique(boxes[:, [1, 3]])
    covered = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        i0 = np.searchsorted(xs, x0)
        i1 = np.searchsorted(xs, x1)
        j0 = np.searchsorted(ys, y0)
        j1 = np.searchsorted(ys, y1)
        covered[j0:j1, i0:i1] = True
    cell = np.outer(np.diff(ys), np.diff(xs))
    return float(cell[covered].sum())


# --- rasterization -----------------------------------------------------------


@dataclass
class OccupancyGrid:
    """Binary grid over a room bounding box; cells[iy, ix], 1 = blocked."""

    cells: np.ndarray
    resolution: float
    origin: Vec2

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_center(self, iy: int, ix: int) -> Vec2:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.resolution

    def cell_of(self, point: Vec2) -> tuple[int, int]:
        rel = (np.asarray(point, dtype=float) - self.origin) / self.resolution
        return int(math.floor(rel[1])), int(math.floor(rel[0]))


def grid_shape_for(boundary: Polygon, resolution: float) -> tuple[int, int]:
    x0, y0, x1, y1 = boundary.bounds
    ncols = int(math.ceil((x1 - x0) / resolution - _COORD_EPS))
    nrows = int(math.ceil((y1 - y0) / resolution - _COORD_EPS))
    return nrows, ncols


def index_span(lo: float, hi: float, origin: float, resolution: float, n: int) -> tuple[int, int]:
    """Closed index range [i0, i1] of cells whose centers fall in [lo, hi]; empty when i0 > i1."""
    i0 = int(math.ceil((lo - origin) / resolution - 0.5 - 1e-9))
    i1 = int(math.floor((hi - origin) / resolution - 0.5 + 1e-9))
    return max(i0, 0), min(i1, n - 1)


def interior_mask(boundary: Polygon, resolution: float) -> np.ndarray:
    """Boolean mask of cells whose centers lie inside the (closed) room boundary."""
    nrows, ncols = grid_shape_for(boundary, resolution)
    x0, y0, _, _ = boundary.bounds
    mask = np.zeros((nrows, ncols), dtype=bool)
    cx = x0 + (np.arange(ncols) + 0.5) * resolution
    levels = np.unique(boundary.vertices[:, 1])
    for iy in range(nrows):
        y = y0 + (iy + 0.5) * resolution
        # nudge off horizontal edge levels so the cross-section is well defined
        if np.any(np.abs(levels - y) < _COORD_EPS):
            y += resolution * 1e-6
        row = np.zeros(ncols, dtype=bool)
        for ax0, ax1 in _cross_section(boundary.vertices, y):
            row |= (cx >= ax0 - _COORD_EPS) & (cx <= ax1 + _COORD_EPS)
        mask[iy] = row
    return mask


def _mark_polygon(cells: np.ndarray, poly: Polygon, origin: Vec2, resolution: float) -> None:
    nrows, ncols = cells.shape
    b = _is_axis_rect(poly)
    if b is not None:
        boxes = [b]
    elif is_rectilinear(poly):
        boxes = list(decompose_rectilinear(poly))
    else:
        boxes = None
    if boxes is not None:
        for x0, y0, x1, y1 in boxes:
            ix0, ix1 = index_span(x0, x1, origin[0], resolution, ncols)
            iy0, iy1 = index_span(y0, y1, origin[1], resolution, nrows)
            if ix0 <= ix1 and iy0 <= iy1:
                cells[iy0 : iy1 + 1, ix0 : ix1 + 1] = 1
        return
    # general polygon: even-odd test on cell centers within the bounding box
    x0, y0, x1, y1 = poly.bounds
    ix0, ix1 = index_span(x0, x1, origin[0], resolution, ncols)
    iy0, iy1 = index_span(y0, y1, origin[1], resolution, nrows)
    v = poly.vertices
    nv = len(v)
    for iy in range(iy0, iy1 + 1):
        py = origin[1] + (iy + 0.5) * resolution
        for ix in range(ix0, ix1 + 1):
            px = origin[0] + (ix + 0.5) * resolution
            inside = False
            for i in range(nv):
                ax, ay = v[i]
                bx, by = v[(i + 1) % nv]
                if (ay > py) != (by > py):
                    t = (py - ay) / (by - ay)
                    if px < ax + t * (bx - ax):
                        inside = not inside
            if inside:
                cells[iy, ix] = 1


def rasterize(
    polys: list[Polygon],
    boundary: Polygon,
    resolution: float,
    room_mask: np.ndarray | None = None,
) -> OccupancyGrid:
    """Binary occupancy over the room bounding box.

    A cell is blocked when its center lies inside any polygon or outside
    the room boundary.  ``room_mask`` may pass a precomputed interior mask
    (see ``interior_mask``) to skip the per-row cross sections.
    """
    if resolution <= 0:
        raise GeometryError("resolution must be positive")
    if room_mask is None:
        room_mask = interior_mask(boundary, resolution)
    x0, y0, _, _ = boundary.bounds
    origin = vec2(x0, y0)
    cells = np.where(room_mask, 0, 1).astype(np.uint8)
    for poly in polys:
        _mark_polygon(cells, poly, origin, resolution)
    return OccupancyGrid(cells=cells, resolution=resolution, origin=origin)


# --- distances ---------------------------------------------------------------


def point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def box_segment_distance(bounds: tuple[float, float, float, float], a: Vec2, b: Vec2) -> float:
    """Distance between an axis-aligned box and an axis-parallel segment."""
    x0, y0, x1, y1 = bounds
    sx0, sx1 = min(a[0], b[0]), max(a[0], b[0])
    sy0, sy1 = min(a[1], b[1]), max(a[1], b[1])
    gx = max(0.0, max(x0, sx0) - min(x1, sx1))
    gy = max(0.0, max(y0, sy0) - min(y1, sy1))
    return math.hypot(gx, gy)
