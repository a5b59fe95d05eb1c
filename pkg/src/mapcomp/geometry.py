"""Vectorized map data model and geometric primitives.

Coordinates are meters in the ego frame: x forward, y left, z up.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

DEGENERATE_EPS = 1e-9


class GeometryError(ValueError):
    pass


class MapClass(str, enum.Enum):
    DASHED_DIVIDER = "lane_divider_dashed"
    SOLID_DIVIDER = "lane_divider_solid"
    BOUNDARY = "road_boundary"
    CENTERLINE = "lane_centerline"
    PED_CROSSING = "ped_crossing"

    @property
    def short(self) -> str:
        return _SHORT_NAMES[self]

    @property
    def is_polygon(self) -> bool:
        return self is MapClass.PED_CROSSING

    @property
    def is_separator(self) -> bool:
        return self in SEPARATOR_CLASSES


_SHORT_NAMES = {
    MapClass.DASHED_DIVIDER: "dsh",
    MapClass.SOLID_DIVIDER: "sol",
    MapClass.BOUNDARY: "bou",
    MapClass.CENTERLINE: "cen",
    MapClass.PED_CROSSING: "ped",
}

# report column order
CLASS_ORDER = (
    MapClass.DASHED_DIVIDER,
    MapClass.SOLID_DIVIDER,
    MapClass.BOUNDARY,
    MapClass.CENTERLINE,
    MapClass.PED_CROSSING,
)
DIVIDER_CLASSES = frozenset({MapClass.DASHED_DIVIDER, MapClass.SOLID_DIVIDER})
SEPARATOR_CLASSES = DIVIDER_CLASSES | {MapClass.BOUNDARY}


@dataclass(frozen=True)
class BevRange:
    x_min: float = -30.0
    x_max: float = 30.0
    y_min: float = -15.0
    y_max: float = 15.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(f"invalid BEV range {self.as_list()}")

    def as_list(self) -> list[float]:
        return [self.x_min, self.x_max, self.y_min, self.y_max]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BevRange":
        if len(values) != 4:
            raise GeometryError("BEV range needs 4 values")
        return cls(*(float(v) for v in values))

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def normalize(self, xy) -> np.ndarray:
        """Scale x-y coordinates onto the unit square spanned by the range."""
        xy = np.asarray(xy, dtype=float)
        lo = np.array([self.x_min, self.y_min])
        span = np.array([self.x_max - self.x_min, self.y_max - self.y_min])
        return (xy[..., :2] - lo) / span

    def contains(self, xy, tol: float = 0.0) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        x, y = xy[..., 0], xy[..., 1]
        return (
            (x >= self.x_min - tol) & (x <= self.x_max + tol)
            & (y >= self.y_min - tol) & (y <= self.y_max + tol)
        )


def _as_points(points) -> np.ndarray:
    arr = np.array(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise GeometryError(f"points must have shape (n, 2) or (n, 3), got {arr.shape}")
    if arr.shape[1] == 2:
        arr = np.column_stack([arr, np.zeros(len(arr))])
    if not np.all(np.isfinite(arr)):
        raise GeometryError("points must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MapElement:
    """One vectorized map instance.

    Polygons (pedestrian crossings) are stored without repeating the first
    vertex; ``closed`` carries the closure.
    """

    id: str
    cls: MapClass
    points: np.ndarray
    closed: Optional[bool] = None
    left_neighbor: Optional[str] = None
    right_neighbor: Optional[str] = None

    def __post_init__(self):
        cls = MapClass(self.cls)
        object.__setattr__(self, "cls", cls)
        pts = _as_points(self.points)
        object.__setattr__(self, "points", pts)
        closed = cls.is_polygon if self.closed is None else bool(self.closed)
        if closed != cls.is_polygon:
            raise GeometryError(
                f"element {self.id}: closed={closed} inconsistent with class {cls.value}"
            )
        object.__setattr__(self, "closed", closed)
        min_points = 3 if closed else 2
        if len(pts) < min_points:
            raise GeometryError(f"element {self.id}: needs at least {min_points} points")
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(steps <= DEGENERATE_EPS):
            raise GeometryError(f"element {self.id}: consecutive points coincide")
        if closed and np.linalg.norm(pts[0] - pts[-1]) <= DEGENERATE_EPS:
            raise GeometryError(f"element {self.id}: closed polygon repeats its first point")

    def __eq__(self, other):
        if not isinstance(other, MapElement):
            return NotImplemented
        return (
            self.id == other.id
            and self.cls is other.cls
            and self.closed == other.closed
            and self.left_neighbor == other.left_neighbor
            and self.right_neighbor == other.right_neighbor
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    def length(self) -> float:
        return float(_cumulative_length(self.points, self.closed)[-1])

    def replace(self, **changes) -> "MapElement":
        fields = dict(
            id=self.id, cls=self.cls, points=self.points, closed=self.closed,
            left_neighbor=self.left_neighbor, right_neighbor=self.right_neighbor,
        )
        fields.update(changes)
        return MapElement(**fields)


@dataclass(frozen=True)
class VectorMap:
    elements: tuple = ()
    bev_range: BevRange = field(default_factory=BevRange)

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        ids = [e.id for e in elements]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise GeometryError(f"duplicate element ids: {dupes}")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.elements]

    def get(self, element_id: str) -> MapElement:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise KeyError(element_id)

    def of_class(self, *classes: MapClass) -> list[MapElement]:
        return [e for e in self.elements if e.cls in classes]

    def subset(self, ids: Iterable[str]) -> "VectorMap":
        keep = set(ids)
        return VectorMap(tuple(e for e in self.elements if e.id in keep), self.bev_range)


def _cumulative_length(points: np.ndarray, closed: bool) -> np.ndarray:
    if closed:
        points = np.vstack([points, points[:1]])
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def resample_points(points, n: int, closed: bool = False) -> np.ndarray:
    """Equal arc-length resampling of a raw point array (any dimension)."""
    if n < 2:
        raise GeometryError("resample needs n >= 2")
    pts = np.asarray(points, dtype=float)
    cum = _cumulative_length(pts, closed)
    total = cum[-1]
    if total < DEGENERATE_EPS:
        raise GeometryError("degenerate geometry")
    if closed:
        src = np.vstack([pts, pts[:1]])
        s = total * np.arange(n) / n
    else:
        src = pts
        s = np.linspace(0.0, total, n)
    # repeated vertices give flat steps in cum; keep the last sample of each
    keep = np.concatenate([np.diff(cum) > 0, [True]])
    cum, src = cum[keep], src[keep]
    out = np.column_stack([np.interp(s, cum, src[:, k]) for k in range(pts.shape[1])])
    out[0] = pts[0]
    if not closed:
        out[-1] = pts[-1]
    return out


def resample(element: MapElement, n: int) -> MapElement:
    """Return ``element`` with ``n`` points at equal arc-length spacing.

    Open polylines keep both endpoints. Closed polygons get ``n`` points
    around the perimeter, starting at the original first vertex.
    """
    return element.replace(points=resample_points(element.points, n, element.closed))


def chamfer(a, b) -> float:
    """Symmetric mean nearest-neighbour distance in the x-y plane."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise GeometryError("chamfer distance of an empty point set")
    d2 = _squared_distances(a[None], b[None])[0, 0]
    return 0.5 * (np.sqrt(d2.min(axis=1)).mean() + np.sqrt(d2.min(axis=0)).mean())


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(_squared_distances(np.asarray(a, float)[None], np.asarray(b, float)[None])[0, 0])


def _squared_distances(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    # (P, n, 2) x (G, m, 2) -> (P, G, n, m); per-coordinate to keep the inner loops wide
    dx = p[:, None, :, None, 0] - g[None, :, None, :, 0]
    dy = p[:, None, :, None, 1] - g[None, :, None, :, 1]
    return dx * dx + dy * dy


def chamfer_matrix(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> np.ndarray:
    """Chamfer distance for every (prediction, ground truth) pair."""
    out = np.empty((len(preds), len(gts)))
    if not len(preds) or not len(gts):
        return out
    same_size = len({len(p) for p in preds}) == 1 and len({len(g) for g in gts}) == 1
    if not same_size:
        for i, p in enumerate(preds):
            for j, g in enumerate(gts):
                out[i, j] = chamfer(p, g)
        return out
    g = np.stack([np.asarray(x, dtype=float)[:, :2] for x in gts])
    p = np.stack([np.asarray(x, dtype=float)[:, :2] for x in preds])
    # sqrt is monotone, so taking it after the min gives the same value
    step = max(1, int(4e6 // (len(gts) * p.shape[1] * g.shape[1])))
    for i in range(0, len(p), step):
        d2 = _squared_distances(p[i:i + step], g)
        out[i:i + step] = 0.5 * (np.sqrt(d2.min(axis=3)).mean(axis=2)
                                 + np.sqrt(d2.min(axis=2)).mean(axis=2))
    return out


# -- clipping -----------------------------------------------------------------

def _liang_barsky(p, q, rng: BevRange):
    dx, dy = q[0] - p[0], q[1] - p[1]
    t0, t1 = 0.0, 1.0
    for pk, qk in (
        (-dx, p[0] - rng.x_min),
        (dx, rng.x_max - p[0]),
        (-dy, p[1] - rng.y_min),
        (dy, rng.y_max - p[1]),
    ):
        if pk == 0.0:
            if qk < 0.0:
                return None
            continue
        with np.errstate(over="ignore"):
            r = qk / pk
        if pk < 0.0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return t0, t1


def _clamp(points: np.ndarray, rng: BevRange) -> np.ndarray:
    points = np.array(points, dtype=float)
    points[:, 0] = np.clip(points[:, 0], rng.x_min, rng.x_max)
    points[:, 1] = np.clip(points[:, 1], rng.y_min, rng.y_max)
    return points


def _dedupe(points: np.ndarray, closed: bool) -> np.ndarray:
    keep = [points[0]]
    for p in points[1:]:
        if np.linalg.norm(p - keep[-1]) > DEGENERATE_EPS:
            keep.append(p)
    if closed:
        while len(keep) > 1 and np.linalg.norm(keep[-1] - keep[0]) <= DEGENERATE_EPS:
            keep.pop()
    return np.array(keep)


def clip_polyline(points: np.ndarray, rng: BevRange) -> list[np.ndarray]:
    """Cut an open polyline at the range border; returns the inside parts in order."""
    parts: list[list[np.ndarray]] = []
    cur: Optional[list[np.ndarray]] = None
    for p, q in zip(points[:-1], points[1:]):
        hit = _liang_barsky(p, q, rng)
        if hit is None:
            if cur is not None:
                parts.append(cur)
                cur = None
            continue
        t0, t1 = hit
        a = p + (q - p) * t0
        b = p + (q - p) * t1
        if cur is None or t0 > 0.0:
            if cur is not None:
                parts.append(cur)
            cur = [a]
        cur.append(b)
        if t1 < 1.0:
            parts.append(cur)
            cur = None
    if cur is not None:
        parts.append(cur)

    out = []
    for part in parts:
        arr = _dedupe(_clamp(np.array(part), rng), closed=False)
        if len(arr) >= 2 and _cumulative_length(arr, False)[-1] >= DEGENERATE_EPS:
            out.append(arr)
    return out


def clip_polygon(points: np.ndarray, rng: BevRange) -> Optional[np.ndarray]:
    """Sutherland-Hodgman clip of a closed polygon against the range rectangle."""
    edges = (
        (0, rng.x_min, 1.0),
        (0, rng.x_max, -1.0),
        (1, rng.y_min, 1.0),
        (1, rng.y_max, -1.0),
    )
    poly = list(points)
    for axis, bound, sign in edges:
        if not poly:
            break
        inside = lambda p: sign * (p[axis] - bound) >= 0.0  # noqa: E731
        src, poly = poly, []
        for i, cur in enumerate(src):
            prev = src[i - 1]
            if inside(cur):
                if not inside(prev):
                    poly.append(_cross(prev, cur, axis, bound))
                poly.append(cur)
            elif inside(prev):
                poly.append(_cross(prev, cur, axis, bound))
    if len(poly) < 3:
        return None
    arr = _dedupe(_clamp(np.array(poly), rng), closed=True)
    if len(arr) < 3 or abs(_shoelace(arr)) < DEGENERATE_EPS:
        return None
    return arr


def _cross(p, q, axis, bound):
    t = (bound - p[axis]) / (q[axis] - p[axis])
    return p + (q - p) * t


def _shoelace(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_to_bev(vmap: VectorMap, rng: Optional[BevRange] = None) -> VectorMap:
    """Intersect every element with the BEV rectangle.

    Elements leaving and re-entering the range are split into parts with ids
    ``<id>#0``, ``<id>#1``, ... ; elements fully outside are dropped.
    """
    rng = rng or vmap.bev_range
    out = []
    for e in vmap.elements:
        inside = rng.contains(e.points)
        if np.all(inside):
            out.append(e)
            continue
        if e.closed:
            poly = clip_polygon(e.points, rng)
            if poly is not None:
                out.append(e.replace(points=poly))
            continue
        parts = clip_polyline(e.points, rng)
        if len(parts) == 1:
            out.append(e.replace(points=parts[0]))
        else:
            out.extend(e.replace(id=f"{e.id}#{i}", points=p) for i, p in enumerate(parts))
    return VectorMap(tuple(out), rng)


def point_to_polyline(point, points: np.ndarray, closed: bool = False):
    """Closest point on a polyline (x-y plane) to ``point``.

    Returns ``(distance, foot, tangent)`` with ``tangent`` the unit direction
    of the segment that holds the foot point.
    """
    pts = points[:, :2]
    if closed:
        pts = np.vstack([pts, pts[:1]])
    a, b = pts[:-1], pts[1:]
    v = b - a
    w = np.asarray(point, dtype=float)[:2] - a
    vv = (v * v).sum(axis=1)
    t = np.clip((w * v).sum(axis=1) / vv, 0.0, 1.0)
    feet = a + t[:, None] * v
    dist = np.linalg.norm(feet - np.asarray(point, dtype=float)[:2], axis=1)
    i = int(np.argmin(dist))
    return float(dist[i]), feet[i], v[i] / np.sqrt(vv[i])
