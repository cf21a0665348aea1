import heapq
import math

import numpy as np
import pytest

from furnish import pathfind
from furnish.geometry import OccupancyGrid, rect, vec2
from furnish.pathfind import UNREACHABLE, astar, door_cells, reachability, reachable_flags
from furnish.scene import PlacedItem, default_catalog, default_room, make_room


def dijkstra(cells, start, goal):
    """Independent oracle: uniform-cost search with a plain priority queue."""
    nrows, ncols = cells.shape
    if cells[start] or cells[goal]:
        return UNREACHABLE
    dist = {start: 0}
    heap = [(0, start)]
    seen = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in seen:
            continue
        seen.add(node)
        if node == goal:
            return float(d)
        iy, ix = node
        for ny, nx in ((iy - 1, ix), (iy + 1, ix), (iy, ix - 1), (iy, ix + 1)):
            if 0 <= ny < nrows and 0 <= nx < ncols and not cells[ny, nx]:
                nd = d + 1
                if nd < dist.get((ny, nx), math.inf):
                    dist[(ny, nx)] = nd
                    heapq.heappush(heap, (nd, (ny, nx)))
    return UNREACHABLE


def grid_of(cells, res=1.0):
    return OccupancyGrid(cells=np.asarray(cells, dtype=np.uint8), resolution=res, origin=vec2(0, 0))


def test_astar_empty_grid():
    g = grid_of(np.zeros((3, 3)))
    assert astar(g, (0, 0), (2, 2)) == 4.0


def test_astar_wall_blocks():
    cells = np.zeros((5, 5))
    cells[2, :] = 1
    assert astar(grid_of(cells), (0, 0), (4, 4)) == UNREACHABLE


def test_astar_occupied_endpoints():
    cells = np.zeros((3, 3))
    cells[0, 0] = 1
    g = grid_of(cells)
    assert astar(g, (0, 0), (2, 2)) == UNREACHABLE
    assert astar(g, (2, 2), (0, 0)) == UNREACHABLE


def test_astar_resolution_scales_distance():
    g = grid_of(np.zeros((4, 4)), res=0.5)
    assert astar(g, (0, 0), (0, 3)) == pytest.approx(1.5)


def test_astar_matches_dijkstra_on_random_grids():
    rng = np.random.default_rng(42)
    for _ in range(50):
        cells = (rng.random((20, 20)) < 0.35).astype(np.uint8)
        start = (int(rng.integers(20)), int(rng.integers(20)))
        goal = (int(rng.integers(20)), int(rng.integers(20)))
        got = astar(grid_of(cells), start, goal)
        want = dijkstra(cells, start, goal)
        assert got == want


def test_astar_monotone_under_obstacles():
    rng = np.random.default_rng(9)
    for _ in range(20):
        cells = (rng.random((15, 15)) < 0.2).astype(np.uint8)
        start, goal = (0, 0), (14, 14)
        cells[start] = cells[goal] = 0
        base = astar(grid_of(cells), start, goal)
        blocked = cells.copy()
        free = np.argwhere(blocked == 0)
        pick = free[rng.integers(len(free))]
        if tuple(pick) in (start, goal):
            continue
        blocked[pick[0], pick[1]] = 1
        harder = astar(grid_of(blocked), start, goal)
        if base == UNREACHABLE:
            assert harder == UNREACHABLE
        else:
            assert harder >= base


def test_door_cells_near_south_door():
    room = make_room("square", 10, 10, [{"edge": "s", "center": 5, "width": 1.0}])
    from furnish.geometry import rasterize

    grid = rasterize([], room.boundary, 0.5, room_mask=room.interior_mask(0.5))
    cells = door_cells(room, grid)
    assert cells  # door row exists
    for iy, ix in cells:
        assert iy == 0
        cx = grid.cell_center(iy, ix)
        assert 4.25 <= cx[0] <= 5.75


def test_reachability_single_item():
    cat = default_catalog()
    room = default_room("square")
    item = PlacedItem.place(cat.get("bed"), vec2(3, 5), 0)
    rho = reachability(item, [item], room, 0.1)
    assert rho != UNREACHABLE
    assert rho <= room.diagonal + 2 * 0.1 + room.diagonal  # grid path inflation bound


def test_reachability_walled_in():
    cat = default_catalog()
    room = default_room("square")
    target = PlacedItem.place(cat.get("chair"), vec2(3, 3), 0)
    # box the chair in with four beds
    walls = [
        PlacedItem.place(cat.get("bed"), vec2(3, 1.5), 1),
        PlacedItem.place(cat.get("bed"), vec2(3, 4.5), 1),
        PlacedItem.place(cat.get("bed"), vec2(1.5, 3), 0),
        PlacedItem.place(cat.get("bed"), vec2(4.5, 3), 0),
    ]
    layout = [target] + walls
    assert reachability(target, layout, room, 0.1) == UNREACHABLE
    for wall in walls:
        assert reachability(wall, layout, room, 0.1) != UNREACHABLE


def test_reachability_oracle_on_empty_room():
    room = make_room("square", 10, 10, [{"edge": "s", "center": 5, "width": 1.0}])
    cat = default_catalog()
    item = PlacedItem.place(cat.get("chair"), vec2(5, 9), 0)
    rho = reachability(item, [item], room, 0.5)
    # straight-line lower bound from door midpoint (5, 0) to (5, 9)
    assert rho >= 9 - 0.5
    assert rho <= 9 + 1.5


def test_reachable_flags_matches_reachability():
    rng = np.random.default_rng(123)
    cat = default_catalog()
    ids = ["bed", "desk", "chair", "nightstand", "wardrobe", "bookshelf"]
    for shape in ("square", "rectangle", "l_shape", "u_shape"):
        room = default_room(shape)
        for _ in range(25):
            placed = []
            for i in ids[: int(rng.integers(2, len(ids) + 1))]:
                spec = cat.get(i)
                placed.append(
                    PlacedItem.place(
                        spec,
                        vec2(rng.uniform(0, room.n), rng.uniform(0, room.m)),
                        int(rng.integers(4)),
                    )
                )
            flags = reachable_flags(placed, room, 0.1)
            expect = [reachability(p, placed, room, 0.1) != UNREACHABLE for p in placed]
            assert list(flags) == expect


def test_reachable_flags_blocked_pocket():
    cat = default_catalog()
    room = make_room("square", 6, 6, [{"edge": "s", "center": 3, "width": 0.9}])
    pocket_item = PlacedItem.place(cat.get("chair"), vec2(0.7, 5.3), 0)
    # seal the corner with a long item: sofa spans x in [0,2], y in [4.1, 5.0]
    blocker = PlacedItem.place(cat.get("sofa"), vec2(1.0, 4.55), 0)
    sealer = PlacedItem.place(cat.get("sofa"), vec2(0.45, 3.0), 1)  # vertical, x in [0,0.9]
    layout = [pocket_item, blocker, sealer]
    flags = reachable_flags(layout, room, 0.1)
    expect = [reachability(p, layout, room, 0.1) != UNREACHABLE for p in layout]
    assert list(flags) == expect
