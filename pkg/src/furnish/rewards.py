"""The six interior-design guideline rewards and their composite.

All components are bounded in [-1, 1] over any (possibly partial) layout.
Sums over the furniture set use the number of items placed so far, pairs are
only scored once both members are down, and degenerate denominators (no
pairs, no clearance demand, everything alignment-exempt, empty layout)
contribute the neutral value 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .geometry import box_segment_distance, rot90, union_area
from .pathfind import reachable_flags
from .scene import Catalog, PairRelation, PlacedItem, Room

DEFAULT_GRID_RESOLUTION = 0.1

COMPONENT_NAMES = ("pair", "access", "vis", "path", "balance", "align")


@dataclass(frozen=True)
class GuidelineMask:
    """Which reward components contribute to the composite."""

    pair: bool = True
    access: bool = True
    vis: bool = True
    path: bool = True
    balance: bool = True
    align: bool = True

    def __post_init__(self) -> None:
        if not any(getattr(self, f.name) for f in fields(self)):
            raise ValueError("at least one guideline reward must stay enabled")

    @staticmethod
    def without(disabled: list[str]) -> "GuidelineMask":
        unknown = set(disabled) - set(COMPONENT_NAMES)
        if unknown:
            raise ValueError(f"unknown reward names: {sorted(unknown)}")
        return GuidelineMask(**{name: name not in disabled for name in COMPONENT_NAMES})

    def enabled_names(self) -> list[str]:
        return [name for name in COMPONENT_NAMES if getattr(self, name)]


@dataclass(frozen=True)
class RewardBreakdown:
    r_pair: float
    r_access: float
    r_vis: float
    r_path: float
    r_balance: float
    r_align: float
    r_composite: float

    def component(self, name: str) -> float:
        return getattr(self, {"vis": "r_vis", "path": "r_path"}.get(name, f"r_{name}"))

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _placed_pairs(
    placed: list[PlacedItem], pairs: list[PairRelation]
) -> list[tuple[PlacedItem, PlacedItem, int]]:
    by_id = {p.spec_id: p for p in placed}
    out = []
    for rel in pairs:
        if rel.parent in by_id and rel.child in by_id:
            out.append((by_id[rel.parent], by_id[rel.child], rel.alpha))
    return out


def pair_reward(placed: list[PlacedItem], pairs: list[PairRelation], room: Room) -> float:
    """Distance/orientation kernel score over fully placed parent-child pairs.

    Per pair: (1 + cos(pi*d/diag)) * (1 + alpha*<n_p, n_c>)/2 - 1, which maps
    the raw kernel product from [0, 2] onto [-1, 1].
    """
    scored = _placed_pairs(placed, pairs)
    if not scored:
        return 0.0
    diag = room.diagonal
    total = 0.0
    for parent, child, alpha in scored:
        d = float(np.linalg.norm(parent.position - child.position))
        k_dist = 1.0 + math.cos(math.pi * min(d, diag) / diag)
        k_dir = (1.0 + alpha * float(parent.front_world @ child.front_world)) / 2.0
        total += k_dist * k_dir - 1.0
    return total / len(scored)


def _strip_bounds(fb, direction, offset):
    """Bounds of the exterior clearance strip off one face of an axis rect."""
    x0, y0, x1, y1 = fb
    dx, dy = direction
    if dx > 0:
        return (x1, y0, x1 + offset, y1)
    if dx < 0:
        return (x0 - offset, y0, x0, y1)
    if dy > 0:
        return (x0, y1, x1, y1 + offset)
    return (x0, y0 - offset, x1, y0)


def access_reward(placed: list[PlacedItem], catalog: Catalog, room: Room) -> float:
    """One minus twice the mean obstructed fraction of each item's clearance strips.

    A strip is obstructed where it leaves the room or meets the footprint of
    a non-paired placed item.
    """
    if not placed:
        return 0.0
    room_boxes = room.rect_pieces()
    total_obstruction = 0.0
    for item in placed:
        spec = catalog.get(item.spec_id)
        blockers = [
            q.footprint.bounds
            for q in placed
            if q is not item and not catalog.are_paired(item.spec_id, q.spec_id)
        ]
        area_u = 0.0
        area_v = 0.0
        fb = item.footprint.bounds
        for direction, offset in spec.clearance_directions():
            world_dir = rot90(direction, item.k)
            sb = _strip_bounds(fb, (float(world_dir[0]), float(world_dir[1])), offset)
            strip_area = (sb[2] - sb[0]) * (sb[3] - sb[1])
            area_u += strip_area
            inside_pieces = [b for b in (_box_overlap_bounds(sb, rb) for rb in room_boxes) if b]
            inside = sum((b[2] - b[0]) * (b[3] - b[1]) for b in inside_pieces)
            area_v += strip_area - inside
            if blockers and inside_pieces:
                hits = []
                for piece in inside_pieces:
                    for qb in blockers:
                        ov = _box_overlap_bounds(piece, qb)
                        if ov is not None:
                            hits.append(ov)
                if len(hits) == 1:
                    b = hits[0]
                    area_v += (b[2] - b[0]) * (b[3] - b[1])
                elif hits:
                    area_v += union_area(np.array(hits))
        if area_u > 0:
            total_obstruction += area_v / area_u
    return 1.0 - 2.0 * total_obstruction / len(placed)


def visibility_reward(placed: list[PlacedItem], room: Room) -> float:
    """Negative mean dot product between item fronts and their nearest wall's outward normal."""
    if not placed:
        return 0.0
    total = 0.0
    for item in placed:
        edge = _nearest_wall(room, item.position)
        total += float(item.front_world[0]) * edge[4] + float(item.front_world[1]) * edge[5]
    return -total / len(placed)


def pathway_reward(
    placed: list[PlacedItem],
    room: Room,
    grid_resolution: float = DEFAULT_GRID_RESOLUTION,
) -> float:
    """Reachability from doorways with a proximity falloff near the doors.

    Unreachable items contribute a full penalty term; reachable items
    contribute exp(-(d_door/diag)^2), so crowding the doorway is penalized.
    """
    if not placed:
        return 0.0
    flags = reachable_flags(placed, room, grid_resolution)
    diag = room.diagonal
    total = 0.0
    for item, reachable in zip(placed, flags):
        if not reachable:
            total += 1.0
            continue
        d_door = min(float(np.linalg.norm(item.position - seg.midpoint)) for seg in room.doors)
        total += math.exp(-((d_door / diag) ** 2))
    return 1.0 - 2.0 * total / len(placed)


def balance_reward(placed: list[PlacedItem], room: Room) -> float:
    """Area-weighted centering and spread relative to the room's uniform reference."""
    if not placed:
        return 0.0
    total_w = 0.0
    mx = my = 0.0
    for p in placed:
        total_w += p.area
        mx += p.area * float(p.position[0])
        my += p.area * float(p.position[1])
    mx /= total_w
    my /= total_w
    cxx = cxy = cyy = 0.0
    for p in placed:
        dx = float(p.position[0]) - mx
        dy = float(p.position[1]) - my
        cxx += p.area * dx * dx
        cxy += p.area * dx * dy
        cyy += p.area * dy * dy
    cxx /= total_w
    cxy /= total_w
    cyy /= total_w
    ref = room.reference_variance
    ox, oy = room.center
    center_term = math.exp(-((mx - ox) ** 2 + (my - oy) ** 2) / room.diagonal**2)
    spread_sq = (cxx - ref) ** 2 + 2.0 * cxy**2 + (cyy - ref) ** 2
    spread_term = math.exp(-spread_sq / ref**2)
    return center_term + spread_term - 1.0


def alignment_reward(placed: list[PlacedItem], catalog: Catalog, room: Room) -> float:
    """Area-weighted wall alignment of long axes, with a proximity falloff.

    Alignment-exempt items are excluded; if everything is exempt the reward
    is neutral.
    """
    num = 0.0
    den = 0.0
    for item in placed:
        spec = catalog.get(item.spec_id)
        if spec.alignment_exempt:
            continue
        ax, ay, bx, by, _, _ = _nearest_wall(room, item.position)
        t = np.array([bx - ax, by - ay])
        tangent = t / np.linalg.norm(t)
        axis = np.array([1.0, 0.0]) if spec.width >= spec.depth else np.array([0.0, 1.0])
        axis_world = rot90(axis, item.k)
        cos_dev = min(1.0, abs(float(axis_world @ tangent)))
        theta = math.acos(cos_dev)
        dist = box_segment_distance(item.footprint.bounds, (ax, ay), (bx, by))
        omega = dist / spec.long_axis_length
        num += item.area * math.cos(2.0 * theta) ** 2 * (1.0 - math.tanh(omega) ** 2)
        den += item.area
    if den == 0.0:
        return 0.0
    return num / den


def composite_reward(
    placed: list[PlacedItem],
    catalog: Catalog,
    room: Room,
    mask: GuidelineMask = GuidelineMask(),
    grid_resolution: float = DEFAULT_GRID_RESOLUTION,
) -> RewardBreakdown:
    """All six components plus the mean of the enabled ones."""
    values = {
        "pair": pair_reward(placed, catalog.pairs, room),
        "access": access_reward(placed, catalog, room),
        "vis": visibility_reward(placed, room),
        "path": pathway_reward(placed, room, grid_resolution),
        "balance": balance_reward(placed, room),
        "align": alignment_reward(placed, catalog, room),
    }
    enabled = mask.enabled_names()
    composite = sum(values[name] for name in enabled) / len(enabled)
    return RewardBreakdown(
        r_pair=values["pair"],
        r_access=values["access"],
        r_vis=values["vis"],
        r_path=values["path"],
        r_balance=values["balance"],
        r_align=values["align"],
        r_composite=composite,
    )


# --- helpers ------------------------------------------------------------------


def _box_overlap_bounds(a, b):
    x0, y0 = max(a[0], b[0]), max(a[1], b[1])
    x1, y1 = min(a[2], b[2]), min(a[3], b[3])
    if x1 > x0 and y1 > y0:
        return (x0, y0, x1, y1)
    return None


def _nearest_wall(room: Room, point: np.ndarray):
    """Nearest boundary edge (ax, ay, bx, by, nx, ny) to a point; first wins ties."""
    px, py = float(point[0]), float(point[1])
    best = None
    best_dist = math.inf
    for edge in room.wall_edges_flat():
        ax, ay, bx, by = edge[:4]
        gx = max(min(ax, bx) - px, 0.0, px - max(ax, bx))
        gy = max(min(ay, by) - py, 0.0, py - max(ay, by))
        d = math.hypot(gx, gy)
        if d < best_dist:
            best, best_dist = edge, d
    return best
