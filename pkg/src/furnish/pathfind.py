"""Grid reachability: A* distances from doorways to furniture centers.

The grid is 4-connected with unit step cost, so the Manhattan heuristic is
admissible and A*, Dijkstra and breadth-first search agree exactly.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np
from scipy import ndimage

from .geometry import OccupancyGrid, index_span, rasterize
from .scene import PlacedItem, Room

UNREACHABLE = math.inf

_CONNECT4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def astar(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]) -> float:
    """Shortest 4-connected path length in meters, or UNREACHABLE.

    Ties on f-score break on row-major cell index, so the search order is
    fully deterministic.
    """
    cells = grid.cells
    nrows, ncols = cells.shape
    for cell in (start, goal):
        if not (0 <= cell[0] < nrows and 0 <= cell[1] < ncols):
            raise ValueError(f"cell {cell} out of bounds for grid {cells.shape}")
    if cells[start] or cells[goal]:
        return UNREACHABLE
    if start == goal:
        return 0.0

    def h(iy: int, ix: int) -> int:
        return abs(iy - goal[0]) + abs(ix - goal[1])

    g = np.full((nrows, ncols), -1, dtype=np.int64)
    g[start] = 0
    open_heap = [(h(*start), start[0] * ncols + start[1])]
    closed = np.zeros((nrows, ncols), dtype=bool)
    while open_heap:
        _, idx = heapq.heappop(open_heap)
        iy, ix = divmod(idx, ncols)
        if closed[iy, ix]:
            continue
        closed[iy, ix] = True
        if (iy, ix) == goal:
            return float(g[iy, ix]) * grid.resolution
        base = g[iy, ix] + 1
        for ny, nx in ((iy - 1, ix), (iy + 1, ix), (iy, ix - 1), (iy, ix + 1)):
            if 0 <= ny < nrows and 0 <= nx < ncols and not cells[ny, nx] and not closed[ny, nx]:
                if g[ny, nx] < 0 or base < g[ny, nx]:
                    g[ny, nx] = base
                    heapq.heappush(open_heap, (base + h(ny, nx), ny * ncols + nx))
    return UNREACHABLE


def door_cells(room: Room, grid: OccupancyGrid) -> list[tuple[int, int]]:
    """Cells whose centers lie within half a cell of a door segment, inside the room."""
    res = grid.resolution
    cache_key = ("doors", res, grid.cells.shape)
    cached = room._mask_cache.get(cache_key)
    if cached is not None:
        return cached
    nrows, ncols = grid.cells.shape
    room_mask = room.interior_mask(res)
    out = []
    for seg in room.doors:
        sx0, sx1 = sorted((seg.a[0], seg.b[0]))
        sy0, sy1 = sorted((seg.a[1], seg.b[1]))
        ix0, ix1 = index_span(sx0 - 0.5 * res, sx1 + 0.5 * res, grid.origin[0], res, ncols)
        iy0, iy1 = index_span(sy0 - 0.5 * res, sy1 + 0.5 * res, grid.origin[1], res, nrows)
        for iy in range(iy0, iy1 + 1):
            for ix in range(ix0, ix1 + 1):
                if not room_mask[iy, ix]:
                    continue
                c = grid.cell_center(iy, ix)
                gx = max(0.0, max(sx0 - c[0], c[0] - sx1))
                gy = max(0.0, max(sy0 - c[1], c[1] - sy1))
                if math.hypot(gx, gy) <= 0.5 * res + 1e-9:
                    out.append((iy, ix))
    cells = sorted(set(out))
    room._mask_cache[cache_key] = cells
    return cells


def _bfs_to_targets(free: np.ndarray, start: tuple[int, int], targets: set[tuple[int, int]]) -> float:
    """Unit-cost BFS step count from start to the nearest target over free cells."""
    nrows, ncols = free.shape
    if not free[start]:
        return UNREACHABLE
    if start in targets:
        return 0.0
    dist = np.full((nrows, ncols), -1, dtype=np.int64)
    dist[start] = 0
    q = deque([start])
    while q:
        iy, ix = q.popleft()
        d = dist[iy, ix] + 1
        for ny, nx in ((iy - 1, ix), (iy + 1, ix), (iy, ix - 1), (iy, ix + 1)):
            if 0 <= ny < nrows and 0 <= nx < ncols and free[ny, nx] and dist[ny, nx] < 0:
                if (ny, nx) in targets:
                    return float(d)
                dist[ny, nx] = d
                q.append((ny, nx))
    return UNREACHABLE


def reachability(
    item: PlacedItem,
    placed: list[PlacedItem],
    room: Room,
    resolution: float,
) -> float:
    """Shortest unobstructed grid path from any doorway to the item center (meters).

    The queried item's own footprint is left free so its center is a valid
    goal; equals the minimum over door cells of the A* distance.
    """
    others = [p.footprint for p in placed if p is not item]
    grid = rasterize(others, room.boundary, resolution, room_mask=room.interior_mask(resolution))
    goal = grid.cell_of(item.position)
    nrows, ncols = grid.cells.shape
    if not (0 <= goal[0] < nrows and 0 <= goal[1] < ncols):
        return UNREACHABLE
    doors = set(door_cells(room, grid))
    if not doors:
        return UNREACHABLE
    free = grid.cells == 0
    steps = _bfs_to_targets(free, goal, {d for d in doors if free[d]})
    return steps * resolution if steps != UNREACHABLE else UNREACHABLE


def reachable_flags(placed: list[PlacedItem], room: Room, resolution: float) -> np.ndarray:
    """Per-item reachability indicators for a whole layout.

    Equivalent to ``reachability(...) < inf`` for each item.  The base free
    space (all items rasterized) is labeled once; each item then runs a local
    flood from its center over the base mask with its own cells freed, ending
    as soon as it touches a component that already contains a free door cell.
    """
    n = len(placed)
    flags = np.zeros(n, dtype=bool)
    if n == 0:
        return flags
    room_mask = room.interior_mask(resolution)
    nrows, ncols = room_mask.shape
    x0 = float(room.boundary.bounds[0])
    y0 = float(room.boundary.bounds[1])
    counts = np.zeros((nrows, ncols), dtype=np.int16)
    spans = []
    for p in placed:
        bx0, by0, bx1, by1 = p.footprint.bounds
        ix0, ix1 = index_span(bx0, bx1, x0, resolution, ncols)
        iy0, iy1 = index_span(by0, by1, y0, resolution, nrows)
        spans.append((iy0, iy1, ix0, ix1))
        if ix0 <= ix1 and iy0 <= iy1:
            counts[iy0 : iy1 + 1, ix0 : ix1 + 1] += 1
    base_grid = OccupancyGrid(
        cells=((counts > 0) | ~room_mask).astype(np.uint8),
        resolution=resolution,
        origin=np.array([x0, y0]),
    )
    doors = door_cells(room, base_grid)
    if not doors:
        return flags
    base_free = (counts == 0) & room_mask
    labels, _ = ndimage.label(base_free, structure=_CONNECT4)
    door_connected = np.zeros(int(labels.max()) + 1, dtype=bool)
    door_mask = np.zeros((nrows, ncols), dtype=bool)
    for d in doors:
        door_mask[d] = True
        if base_free[d]:
            door_connected[labels[d]] = True
    reach_mask = door_connected[labels] & base_free

    for i, p in enumerate(placed):
        iy0, iy1, ix0, ix1 = spans[i]
        goal = base_grid.cell_of(p.position)
        gy, gx = goal
        if not (0 <= gy < nrows and 0 <= gx < ncols):
            continue
        if reach_mask[gy, gx]:
            flags[i] = True
            continue
        span_ok = iy0 <= iy1 and ix0 <= ix1
        block = counts[iy0 : iy1 + 1, ix0 : ix1 + 1] if span_ok else None
        in_block = span_ok and iy0 <= gy <= iy1 and ix0 <= gx <= ix1
        if in_block and room_mask[iy0 : iy1 + 1, ix0 : ix1 + 1].all() and np.all(block == 1):
            # fully free rectangular block: connected, so check its rim and doors
            if door_mask[iy0 : iy1 + 1, ix0 : ix1 + 1].any():
                flags[i] = True
                continue
            touches = False
            if iy0 > 0 and reach_mask[iy0 - 1, ix0 : ix1 + 1].any():
                touches = True
            elif iy1 + 1 < nrows and reach_mask[iy1 + 1, ix0 : ix1 + 1].any():
                touches = True
            elif ix0 > 0 and reach_mask[iy0 : iy1 + 1, ix0 - 1].any():
                touches = True
            elif ix1 + 1 < ncols and reach_mask[iy0 : iy1 + 1, ix1 + 1].any():
                touches = True
            flags[i] = touches
            continue
        flags[i] = _local_flood(
            goal, (iy0, iy1, ix0, ix1), counts, room_mask, reach_mask, door_mask
        )
    return flags


def _local_flood(goal, span, counts, room_mask, reach_mask, door_mask) -> bool:
    """Flood from the goal over free cells plus the item's own freed span.

    Ends as soon as it touches a door cell or any cell of a door-connected
    base component.  Only used when the freed span is irregular (overlaps or
    clipping), so the search stays local.
    """
    iy0, iy1, ix0, ix1 = span
    nrows, ncols = counts.shape
    gy, gx = goal
    if not room_mask[gy, gx]:
        return False
    c = counts[gy, gx]
    if not (c == 0 or (c == 1 and iy0 <= gy <= iy1 and ix0 <= gx <= ix1)):
        return False
    seen = {goal}
    queue = deque([goal])
    while queue:
        cy, cx = queue.popleft()
        if door_mask[cy, cx] or reach_mask[cy, cx]:
            return True
        for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
            if (ny, nx) in seen or not (0 <= ny < nrows and 0 <= nx < ncols):
                continue
            if not room_mask[ny, nx]:
                continue
            c = counts[ny, nx]
            if c == 0 or (c == 1 and iy0 <= ny <= iy1 and ix0 <= nx <= ix1):
                seen.add((ny, nx))
                queue.append((ny, nx))
    return False
