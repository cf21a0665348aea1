"""Episodic placement MDP: one furniture item per step, largest first.

States are immutable; ``step`` returns a new state.  An invalid placement
ends the episode immediately with the configured penalty and places nothing.
Action vectors are raw network outputs in R^3; the tanh squash into room
coordinates and the rotation bucketing live here, so policy densities are
taken in the raw space and need no squash corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OccupancyGrid, rasterize, vec2
from .rewards import GuidelineMask, RewardBreakdown, composite_reward
from .scene import Catalog, FurnitureSpec, PlacedItem, Room, descriptor, placement_valid, sort_by_area

OBS_GRID_SIZE = 64
ACTION_DIM = 3


class EnvError(RuntimeError):
    """Stepping a finished episode or similar misuse."""


@dataclass(frozen=True)
class EpisodeConfig:
    room: Room
    catalog: Catalog
    furniture_ids: tuple[str, ...]
    order: str = "descending"  # or "ascending"
    mask: GuidelineMask = GuidelineMask()
    penalty: float = -10.0
    grid_resolution: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.furniture_ids:
            raise ValueError("furniture_ids must be non-empty")
        if self.order not in ("descending", "ascending"):
            raise ValueError(f"unknown placement order '{self.order}'")
        if not math.isfinite(self.penalty):
            raise ValueError("penalty must be finite")

    def specs(self) -> list[FurnitureSpec]:
        return sort_by_area(self.catalog, list(self.furniture_ids), ascending=self.order == "ascending")


@dataclass(frozen=True)
class LayoutState:
    placed: tuple[PlacedItem, ...]
    cursor: int
    occupancy: OccupancyGrid
    done: bool


@dataclass(frozen=True)
class Observation:
    current: np.ndarray  # descriptor of the item being placed
    upcoming: np.ndarray  # descriptor of the next item, zero sentinel at the end
    grid: np.ndarray  # fixed 64x64 occupancy image, 1 = blocked or out of room


@dataclass(frozen=True)
class StepOutcome:
    state: LayoutState
    reward: float
    done: bool
    invalid: bool
    breakdown: RewardBreakdown | None = field(default=None)


def decode_action(raw: np.ndarray, room: Room) -> tuple[np.ndarray, int]:
    """Map raw policy outputs to a position in the room bounding box and a rotation index."""
    a = np.asarray(raw, dtype=float)
    x = (math.tanh(a[0]) + 1.0) / 2.0 * room.n
    y = (math.tanh(a[1]) + 1.0) / 2.0 * room.m
    k = min(3, int(math.floor((math.tanh(a[2]) + 1.0) / 2.0 * 4.0)))
    return vec2(x, y), k


def _occupancy(config: EpisodeConfig, placed: tuple[PlacedItem, ...]) -> OccupancyGrid:
    room = config.room
    return rasterize(
        [p.footprint for p in placed],
        room.boundary,
        config.grid_resolution,
        room_mask=room.interior_mask(config.grid_resolution),
    )


def observation_grid(config: EpisodeConfig, placed: tuple[PlacedItem, ...]) -> np.ndarray:
    """Fixed-size occupancy image; cells beyond the room (incl. padding) read 1."""
    room = config.room
    res = max(room.n, room.m) / OBS_GRID_SIZE
    grid = rasterize(
        [p.footprint for p in placed],
        room.boundary,
        res,
        room_mask=room.interior_mask(res),
    )
    nrows, ncols = grid.cells.shape
    out = np.ones((OBS_GRID_SIZE, OBS_GRID_SIZE))
    out[:nrows, :ncols] = grid.cells[:OBS_GRID_SIZE, :OBS_GRID_SIZE]
    return out


def observe(config: EpisodeConfig, state: LayoutState) -> Observation:
    if state.done:
        raise EnvError("cannot observe a finished episode")
    specs = config.specs()
    t = state.cursor
    current = descriptor(specs[t], config.room)
    upcoming = descriptor(specs[t + 1] if t + 1 < len(specs) else None, config.room)
    return Observation(current=current, upcoming=upcoming, grid=observation_grid(config, state.placed))


def reset(config: EpisodeConfig) -> tuple[LayoutState, Observation]:
    state = LayoutState(placed=(), cursor=0, occupancy=_occupancy(config, ()), done=False)
    return state, observe(config, state)


def step(config: EpisodeConfig, state: LayoutState, raw: np.ndarray) -> StepOutcome:
    if state.done:
        raise EnvError("episode is already finished")
    specs = config.specs()
    spec = specs[state.cursor]
    position, k = decode_action(raw, config.room)
    item = PlacedItem.place(spec, position, k)
    if not placement_valid(config.room, list(state.placed), item.footprint):
        ended = LayoutState(placed=state.placed, cursor=state.cursor, occupancy=state.occupancy, done=True)
        return StepOutcome(state=ended, reward=config.penalty, done=True, invalid=True)
    placed = state.placed + (item,)
    breakdown = composite_reward(
        list(placed), config.catalog, config.room, config.mask, config.grid_resolution
    )
    done = len(placed) == len(specs)
    next_state = LayoutState(placed=placed, cursor=state.cursor + 1, occupancy=_occupancy(config, placed), done=done)
    return StepOutcome(state=next_state, reward=breakdown.r_composite, done=done, invalid=False, breakdown=breakdown)
