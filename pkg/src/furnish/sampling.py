"""Random layout generation by rejection sampling, for tests and baselines."""

from __future__ import annotations

import numpy as np

from .scene import Catalog, PlacedItem, Room, placement_valid, sort_by_area


class LayoutSamplingError(RuntimeError):
    """Could not fit the requested furniture into the room."""


def random_valid_layout(
    catalog: Catalog,
    room: Room,
    selection: list[str],
    rng: np.random.Generator,
    max_item_tries: int = 200,
    max_restarts: int = 20,
) -> list[PlacedItem]:
    """Place the selection (largest first) at uniform random poses, rejecting collisions."""
    specs = sort_by_area(catalog, selection)
    for _ in range(max_restarts):
        placed: list[PlacedItem] = []
        ok = True
        for spec in specs:
            for _ in range(max_item_tries):
                pos = np.array([rng.uniform(0, room.n), rng.uniform(0, room.m)])
                item = PlacedItem.place(spec, pos, int(rng.integers(4)))
                if placement_valid(room, placed, item.footprint):
                    placed.append(item)
                    break
            else:
                ok = False
                break
        if ok:
            return placed
    raise LayoutSamplingError(f"could not place {selection} in a {room.shape_tag} room")
