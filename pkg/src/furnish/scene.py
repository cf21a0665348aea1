"""World model: furniture catalog, functional pairs, rooms with doors, file formats."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import (
    GeometryError,
    Polygon,
    Vec2,
    decompose_rectilinear,
    interior_mask,
    rect,
    rot90,
    transform,
    vec2,
)

CLEARANCE_KEYS = ("front", "back", "left", "right")
_AXIS_DIRS = {(0.0, 1.0), (0.0, -1.0), (1.0, 0.0), (-1.0, 0.0)}


class CatalogError(ValueError):
    """Catalog file is malformed or internally inconsistent."""


class RoomError(ValueError):
    """Room construction or room file problem."""


@dataclass(frozen=True)
class FurnitureSpec:
    """One furniture type: origin-centered rectangle, facing direction, clearances."""

    id: str
    name: str
    width: float
    depth: float
    front: Vec2
    clearances: dict[str, float]
    alignment_exempt: bool = False
    category: str = "misc"
    has_parent: bool = False
    has_child: bool = False

    def __post_init__(self) -> None:
        if self.width <= 0 or self.depth <= 0:
            raise CatalogError(f"item '{self.id}': dimensions must be positive")
        if tuple(np.asarray(self.front, dtype=float)) not in _AXIS_DIRS:
            raise CatalogError(f"item '{self.id}': front must be a unit axis direction")
        for key in CLEARANCE_KEYS:
            if self.clearances.get(key, 0.0) < 0:
                raise CatalogError(f"item '{self.id}': clearance '{key}' must be >= 0")

    @property
    def area(self) -> float:
        return self.width * self.depth

    @property
    def long_axis_length(self) -> float:
        return max(self.width, self.depth)

    def footprint(self) -> Polygon:
        return rect(0.0, 0.0, self.width, self.depth)

    def clearance_directions(self) -> list[tuple[Vec2, float]]:
        """Canonical-frame clearance directions with their offsets (zero offsets skipped)."""
        f = np.asarray(self.front, dtype=float)
        dirs = {
            "front": f,
            "back": -f,
            "left": rot90(f),
            "right": -rot90(f),
        }
        return [(dirs[k], self.clearances.get(k, 0.0)) for k in CLEARANCE_KEYS if self.clearances.get(k, 0.0) > 0]


@dataclass(frozen=True)
class PairRelation:
    """Functional parent-child pair; alpha=-1 prefers facing, +1 parallel fronts."""

    parent: str
    child: str
    alpha: int

    def __post_init__(self) -> None:
        if self.parent == self.child:
            raise CatalogError(f"pair '{self.parent}' cannot reference itself")
        if self.alpha not in (-1, 1):
            raise CatalogError(f"pair {self.parent}->{self.child}: alpha must be -1 or +1")


@dataclass(frozen=True)
class PlacedItem:
    """A furniture item placed in the world frame."""

    spec_id: str
    position: Vec2
    k: int
    footprint: Polygon
    front_world: Vec2
    area: float

    @staticmethod
    def place(spec: FurnitureSpec, position: Vec2, k: int) -> "PlacedItem":
        pos = np.asarray(position, dtype=float)
        k = k % 4
        # a centered axis rect rotated by 90*k degrees is the same rect with
        # swapped extents, bit-identical to transform(pos, k, footprint)
        w, d = (spec.width, spec.depth) if k % 2 == 0 else (spec.depth, spec.width)
        return PlacedItem(
            spec_id=spec.id,
            position=pos,
            k=k,
            footprint=rect(float(pos[0]), float(pos[1]), w, d),
            front_world=rot90(np.asarray(spec.front, dtype=float), k),
            area=spec.area,
        )


@dataclass(frozen=True)
class DoorSegment:
    a: Vec2
    b: Vec2

    @property
    def midpoint(self) -> Vec2:
        return (self.a + self.b) / 2.0


@dataclass
class Room:
    """Rectilinear room with doorways; N and M are the bounding-box extent."""

    boundary: Polygon
    doors: list[DoorSegment]
    shape_tag: str
    n: float
    m: float
    door_params: list[dict] = field(default_factory=list, repr=False)
    _mask_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.doors:
            raise RoomError("room needs at least one doorway")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.n, self.m)

    @property
    def reference_variance(self) -> float:
        """Second moment of a uniform distribution over the bounding box: (N^2+M^2)/12."""
        return (self.n**2 + self.m**2) / 12.0

    @property
    def center(self) -> Vec2:
        if "center" not in self._mask_cache:
            self._mask_cache["center"] = self.boundary.centroid
        return self._mask_cache["center"]

    @property
    def area(self) -> float:
        return self.boundary.area

    def interior_mask(self, resolution: float) -> np.ndarray:
        if resolution not in self._mask_cache:
            self._mask_cache[resolution] = interior_mask(self.boundary, resolution)
        return self._mask_cache[resolution]

    def rect_pieces(self) -> list[tuple[float, float, float, float]]:
        """Disjoint axis-aligned boxes covering the room, cached as plain tuples."""
        if "rects" not in self._mask_cache:
            self._mask_cache["rects"] = [
                tuple(row) for row in decompose_rectilinear(self.boundary).tolist()
            ]
        return self._mask_cache["rects"]

    def wall_edges(self) -> list[tuple[Vec2, Vec2, Vec2]]:
        """Boundary edges as (a, b, outward_normal); CCW boundary puts interior on the left."""
        v = self.boundary.vertices
        edges = []
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            d = b - a
            norm = np.linalg.norm(d)
            outward = np.array([d[1], -d[0]]) / norm
            edges.append((a, b, outward))
        return edges

    def wall_edges_flat(self) -> list[tuple[float, float, float, float, float, float]]:
        """Cached plain-float edges (ax, ay, bx, by, nx, ny) for hot loops."""
        if "edges" not in self._mask_cache:
            self._mask_cache["edges"] = [
                (float(a[0]), float(a[1]), float(b[0]), float(b[1]), float(n[0]), float(n[1]))
                for a, b, n in self.wall_edges()
            ]
        return self._mask_cache["edges"]


@dataclass
class Catalog:
    items: list[FurnitureSpec]
    pairs: list[PairRelation]

    def __post_init__(self) -> None:
        if not self.items:
            raise CatalogError("empty catalog")
        ids = [s.id for s in self.items]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise CatalogError(f"duplicate item ids: {sorted(dupes)}")
        known = set(ids)
        for p in self.pairs:
            for ref in (p.parent, p.child):
                if ref not in known:
                    raise CatalogError(f"pair references unknown item id '{ref}'")
        parents = {p.parent for p in self.pairs}
        children = {p.child for p in self.pairs}
        self.items = [
            replace(s, has_child=s.id in parents, has_parent=s.id in children) for s in self.items
        ]
        self._by_id = {s.id: s for s in self.items}

    def get(self, spec_id: str) -> FurnitureSpec:
        try:
            return self._by_id[spec_id]
        except KeyError:
            raise CatalogError(f"unknown item id '{spec_id}'") from None

    def are_paired(self, a: str, b: str) -> bool:
        return any((p.parent == a and p.child == b) or (p.parent == b and p.child == a) for p in self.pairs)


# --- serialization -----------------------------------------------------------


def _canonical_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def catalog_to_dict(catalog: Catalog) -> dict:
    return {
        "items": [
            {
                "id": s.id,
                "name": s.name,
                "width": s.width,
                "depth": s.depth,
                "front": [float(s.front[0]), float(s.front[1])],
                "clearances": {k: s.clearances.get(k, 0.0) for k in CLEARANCE_KEYS},
                "alignment_exempt": s.alignment_exempt,
                "category": s.category,
            }
            for s in catalog.items
        ],
        "pairs": [{"parent": p.parent, "child": p.child, "alpha": p.alpha} for p in catalog.pairs],
    }


def catalog_from_dict(data: dict) -> Catalog:
    try:
        raw_items = data["items"]
        raw_pairs = data.get("pairs", [])
    except (KeyError, TypeError) as exc:
        raise CatalogError(f"catalog schema violation: {exc}") from exc
    items = []
    for entry in raw_items:
        try:
            items.append(
                FurnitureSpec(
                    id=str(entry["id"]),
                    name=str(entry.get("name", entry["id"])),
                    width=float(entry["width"]),
                    depth=float(entry["depth"]),
                    front=vec2(*entry["front"]),
                    clearances={k: float(v) for k, v in entry.get("clearances", {}).items()},
                    alignment_exempt=bool(entry.get("alignment_exempt", False)),
                    category=str(entry.get("category", "misc")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"catalog item schema violation: {exc}") from exc
    pairs = []
    for entry in raw_pairs:
        try:
            pairs.append(PairRelation(str(entry["parent"]), str(entry["child"]), int(entry["alpha"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"catalog pair schema violation: {exc}") from exc
    return Catalog(items=items, pairs=pairs)


def load_catalog(path: str | Path) -> Catalog:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CatalogError(f"cannot read catalog file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog parse error: {exc}") from exc
    return catalog_from_dict(data)


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    Path(path).write_text(_canonical_dump(catalog_to_dict(catalog)))


def make_room(shape_tag: str, n: float, m: float, doors: list[dict]) -> Room:
    """Build a rectilinear room.

    L-shape removes the north-east quadrant (n/2 x m/2); U-shape removes a
    centered top notch (n/3 wide, m/2 deep).  Door dictionaries carry
    {edge: n|s|e|w, center, width} on the bounding box and are snapped to
    the matching boundary edge.
    """
    if n <= 0 or m <= 0:
        raise RoomError("room dimensions must be positive")
    if shape_tag in ("square", "rectangle"):
        boundary = Polygon([(0, 0), (n, 0), (n, m), (0, m)])
    elif shape_tag == "l_shape":
        boundary = Polygon([(0, 0), (n, 0), (n, m / 2), (n / 2, m / 2), (n / 2, m), (0, m)])
    elif shape_tag == "u_shape":
        boundary = Polygon(
            [
                (0, 0),
                (n, 0),
                (n, m),
                (2 * n / 3, m),
                (2 * n / 3, m / 2),
                (n / 3, m / 2),
                (n / 3, m),
                (0, m),
            ]
        )
    else:
        raise RoomError(f"unknown room shape '{shape_tag}'")
    door_segments = [_snap_door(boundary, n, m, d) for d in doors]
    params = [
        {"edge": str(d["edge"]), "center": float(d["center"]), "width": float(d.get("width", 0.9))}
        for d in doors
    ]
    return Room(
        boundary=boundary,
        doors=door_segments,
        shape_tag=shape_tag,
        n=float(n),
        m=float(m),
        door_params=params,
    )


def _snap_door(boundary: Polygon, n: float, m: float, door: dict) -> DoorSegment:
    try:
        edge = str(door["edge"])
        center = float(door["center"])
        width = float(door.get("width", 0.9))
    except (KeyError, TypeError, ValueError) as exc:
        raise RoomError(f"door schema violation: {exc}") from exc
    if width <= 0:
        raise RoomError("door width must be positive")
    normals = {"n": (0, 1), "s": (0, -1), "e": (1, 0), "w": (-1, 0)}
    if edge not in normals:
        raise RoomError(f"unknown door edge '{edge}'")
    want = np.array(normals[edge], dtype=float)
    lo, hi = center - width / 2.0, center + width / 2.0
    v = boundary.vertices
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        d = b - a
        outward = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        if not np.allclose(outward, want):
            continue
        if want[1] != 0:  # horizontal wall, door extent along x
            span_lo, span_hi = min(a[0], b[0]), min(a[0], b[0]) + abs(d[0])
            if span_lo - 1e-9 <= lo and hi <= span_hi + 1e-9:
                y = a[1]
                return DoorSegment(vec2(lo, y), vec2(hi, y))
        else:  # vertical wall, door extent along y
            span_lo, span_hi = min(a[1], b[1]), min(a[1], b[1]) + abs(d[1])
            if span_lo - 1e-9 <= lo and hi <= span_hi + 1e-9:
                x = a[0]
                return DoorSegment(vec2(x, lo), vec2(x, hi))
    raise RoomError(f"door on edge '{edge}' at {center} does not lie on the room boundary")


def room_to_dict(room: Room) -> dict:
    return {
        "shape": room.shape_tag,
        "n": room.n,
        "m": room.m,
        "doors": [dict(d) for d in room.door_params],
    }


def room_from_dict(data: dict) -> Room:
    try:
        return make_room(str(data["shape"]), float(data["n"]), float(data["m"]), list(data["doors"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, RoomError):
            raise
        raise RoomError(f"room schema violation: {exc}") from exc


def load_room(path: str | Path) -> Room:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RoomError(f"cannot load room file: {exc}") from exc
    return room_from_dict(data)


def save_room(room: Room, path: str | Path) -> None:
    Path(path).write_text(_canonical_dump(room_to_dict(room)))


def layout_to_dict(room: Room, placed: list[PlacedItem]) -> dict:
    return {
        "room": room_to_dict(room),
        "items": [
            {"spec_id": p.spec_id, "x": float(p.position[0]), "y": float(p.position[1]), "k": int(p.k)}
            for p in placed
        ],
    }


def layout_from_dict(data: dict, catalog: Catalog) -> tuple[Room, list[PlacedItem]]:
    try:
        room = room_from_dict(data["room"])
        placed = [
            PlacedItem.place(catalog.get(str(e["spec_id"])), vec2(float(e["x"]), float(e["y"])), int(e["k"]))
            for e in data["items"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (RoomError, CatalogError)):
            raise
        raise RoomError(f"layout schema violation: {exc}") from exc
    return room, placed


def load_layout(path: str | Path, catalog: Catalog) -> tuple[Room, list[PlacedItem]]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RoomError(f"cannot load layout file: {exc}") from exc
    return layout_from_dict(data, catalog)


def save_layout(room: Room, placed: list[PlacedItem], path: str | Path) -> None:
    Path(path).write_text(_canonical_dump(layout_to_dict(room, placed)))


OVERLAP_TOLERANCE = 1e-9  # m^2; shared edges between abutting items stay legal


def placement_valid(room: Room, placed: list[PlacedItem], footprint: Polygon) -> bool:
    """Definition of a valid placement: inside the room, disjoint from prior footprints.

    Footprints are axis-aligned rects, so containment is the covered area
    against the room's rect decomposition and overlaps are interval tests.
    """
    fx0, fy0, fx1, fy1 = footprint.bounds
    covered = 0.0
    for rx0, ry0, rx1, ry1 in room.rect_pieces():
        w = min(fx1, rx1) - max(fx0, rx0)
        h = min(fy1, ry1) - max(fy0, ry0)
        if w > 0 and h > 0:
            covered += w * h
    if covered < footprint.area - OVERLAP_TOLERANCE:
        return False
    for other in placed:
        ox0, oy0, ox1, oy1 = other.footprint.bounds
        w = min(fx1, ox1) - max(fx0, ox0)
        h = min(fy1, oy1) - max(fy0, oy0)
        if w > 0 and h > 0 and w * h > OVERLAP_TOLERANCE:
            return False
    return True


# --- ordering and descriptors -------------------------------------------------


def sort_by_area(catalog: Catalog, selection: list[str], ascending: bool = False) -> list[FurnitureSpec]:
    """Order a furniture selection by footprint area; ties break on id."""
    specs = [catalog.get(i) for i in selection]
    if ascending:
        return sorted(specs, key=lambda s: (s.area, s.id))
    return sorted(specs, key=lambda s: (-s.area, s.id))


DESCRIPTOR_DIM = 12


def descriptor(spec: FurnitureSpec | None, room: Room) -> np.ndarray:
    """12-feature geometric descriptor, normalized by room scale; None gives the zero sentinel."""
    if spec is None:
        return np.zeros(DESCRIPTOR_DIM)
    d = room.diagonal
    return np.array(
        [
            spec.width / room.n,
            spec.depth / room.m,
            spec.area / (room.n * room.m),
            float(spec.front[0]),
            float(spec.front[1]),
            spec.clearances.get("front", 0.0) / d,
            spec.clearances.get("back", 0.0) / d,
            spec.clearances.get("left", 0.0) / d,
            spec.clearances.get("right", 0.0) / d,
            1.0 if spec.has_parent else 0.0,
            1.0 if spec.has_child else 0.0,
            1.0 if spec.alignment_exempt else 0.0,
        ]
    )


# --- built-in catalog ---------------------------------------------------------

_DEFAULT_ITEMS = [
    # id, name, width, depth, front, clearances(front, back, left, right), exempt, category
    ("bed", "Double Bed", 1.6, 2.0, (0, -1), (0.7, 0.0, 0.3, 0.3), False, "bedroom"),
    ("sofa", "Sofa", 2.0, 0.9, (0, -1), (0.8, 0.0, 0.1, 0.1), False, "living"),
    ("dining_table", "Dining Table", 1.6, 0.9, (0, -1), (0.6, 0.6, 0.4, 0.4), False, "dining"),
    ("desk", "Desk", 1.2, 0.6, (0, -1), (0.7, 0.0, 0.0, 0.0), False, "study"),
    ("wardrobe", "Wardrobe", 1.2, 0.6, (0, -1), (0.9, 0.0, 0.0, 0.0), False, "bedroom"),
    ("armchair", "Armchair", 0.8, 0.8, (0, -1), (0.5, 0.0, 0.0, 0.0), False, "living"),
    ("tv_stand", "TV Stand", 1.4, 0.45, (0, -1), (0.8, 0.0, 0.0, 0.0), False, "living"),
    ("coffee_table", "Coffee Table", 1.0, 0.6, (0, -1), (0.3, 0.3, 0.3, 0.3), True, "living"),
    ("dresser", "Dresser", 1.0, 0.5, (0, -1), (0.8, 0.0, 0.0, 0.0), False, "bedroom"),
    ("bookshelf", "Bookshelf", 0.9, 0.35, (0, -1), (0.6, 0.0, 0.0, 0.0), False, "study"),
    ("side_table", "Side Table", 0.5, 0.5, (0, -1), (0.0, 0.0, 0.0, 0.0), False, "living"),
    ("chair", "Desk Chair", 0.5, 0.5, (0, -1), (0.0, 0.4, 0.0, 0.0), True, "study"),
    ("nightstand", "Nightstand", 0.45, 0.45, (0, -1), (0.3, 0.0, 0.0, 0.0), False, "bedroom"),
    ("plant", "Potted Plant", 0.4, 0.4, (0, -1), (0.0, 0.0, 0.0, 0.0), True, "decor"),
    ("floor_lamp", "Floor Lamp", 0.3, 0.3, (0, -1), (0.0, 0.0, 0.0, 0.0), True, "decor"),
]

_DEFAULT_PAIRS = [
    ("desk", "chair", -1),
    ("bed", "nightstand", 1),
]

DEFAULT_SELECTIONS = {
    4: ["bed", "desk", "chair", "nightstand"],
    6: ["bed", "desk", "chair", "nightstand", "wardrobe", "bookshelf"],
    8: ["bed", "desk", "chair", "nightstand", "wardrobe", "bookshelf", "sofa", "coffee_table"],
}

DEFAULT_ROOMS = {
    "square": ("square", 6.0, 6.0),
    "rectangle": ("rectangle", 8.0, 5.0),
    "l_shape": ("l_shape", 8.0, 8.0),
    "u_shape": ("u_shape", 9.0, 6.0),
}


def default_catalog() -> Catalog:
    items = [
        FurnitureSpec(
            id=i,
            name=name,
            width=w,
            depth=d,
            front=vec2(*front),
            clearances=dict(zip(CLEARANCE_KEYS, clear)),
            alignment_exempt=exempt,
            category=cat,
        )
        for i, name, w, d, front, clear, exempt, cat in _DEFAULT_ITEMS
    ]
    pairs = [PairRelation(p, c, a) for p, c, a in _DEFAULT_PAIRS]
    return Catalog(items=items, pairs=pairs)


def default_room(shape: str, door_width: float = 0.9) -> Room:
    try:
        tag, n, m = DEFAULT_ROOMS[shape]
    except KeyError:
        raise RoomError(f"unknown room shape '{shape}'") from None
    return make_room(tag, n, m, [{"edge": "s", "center": n / 2.0, "width": door_width}])
