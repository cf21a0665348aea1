"""Deterministic SVG rendering of layouts.

Conventions: black room boundary, green door segments, gray furniture with a
front arrow, blue dot at the room center and red dot at the layout's
area-weighted centroid, optional translucent clearance strips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rot90
from .rewards import _strip_bounds
from .scene import Catalog, PlacedItem, Room

ROOM_STROKE = "#000000"
ITEM_FILL = "#b0b0b0"
ITEM_STROKE = "#333333"
DOOR_COLOR = "#2e8b57"
CENTER_ROOM_COLOR = "#1f4fd8"
CENTER_LAYOUT_COLOR = "#d82f2f"
ACCESS_FILL = "#7fb2e5"
FRONT_COLOR = "#222222"


@dataclass(frozen=True)
class RenderOptions:
    show_centers: bool = True
    show_fronts: bool = True
    show_access: bool = False
    scale: float = 60.0  # pixels per meter
    margin: float = 0.5  # meters

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


class _Canvas:
    def __init__(self, room: Room, options: RenderOptions) -> None:
        self.scale = options.scale
        self.margin = options.margin
        self.top = room.m + options.margin
        self.width = (room.n + 2 * options.margin) * options.scale
        self.height = (room.m + 2 * options.margin) * options.scale

    def pt(self, x: float, y: float) -> tuple[str, str]:
        return _fmt((x + self.margin) * self.scale), _fmt((self.top - y) * self.scale)

    def points(self, vertices) -> str:
        return " ".join(",".join(self.pt(float(x), float(y))) for x, y in vertices)


def render_svg(
    placed: list[PlacedItem],
    room: Room,
    catalog: Catalog | None = None,
    options: RenderOptions = RenderOptions(),
) -> str:
    """Render one layout as an SVG 1.1 document string (byte-stable for equal input)."""
    c = _Canvas(room, options)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(c.width)}" height="{_fmt(c.height)}" '
        f'viewBox="0 0 {_fmt(c.width)} {_fmt(c.height)}">',
        f'<rect width="{_fmt(c.width)}" height="{_fmt(c.height)}" fill="#ffffff"/>',
        f'<polygon class="room" points="{c.points(room.boundary.vertices)}" '
        f'fill="none" stroke="{ROOM_STROKE}" stroke-width="3"/>',
    ]
    for seg in room.doors:
        x1, y1 = c.pt(float(seg.a[0]), float(seg.a[1]))
        x2, y2 = c.pt(float(seg.b[0]), float(seg.b[1]))
        parts.append(
            f'<line class="door" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
            f'stroke="{DOOR_COLOR}" stroke-width="6"/>'
        )
    if options.show_access and catalog is not None:
        for item in placed:
            spec = catalog.get(item.spec_id)
            fb = item.footprint.bounds
            for direction, offset in spec.clearance_directions():
                world = rot90(direction, item.k)
                sx0, sy0, sx1, sy1 = _strip_bounds(fb, (float(world[0]), float(world[1])), offset)
                corners = [(sx0, sy0), (sx1, sy0), (sx1, sy1), (sx0, sy1)]
                parts.append(
                    f'<polygon class="access" points="{c.points(corners)}" '
                    f'fill="{ACCESS_FILL}" fill-opacity="0.3" stroke="none"/>'
                )
    for item in placed:
        parts.append(
            f'<polygon class="item" points="{c.points(item.footprint.vertices)}" '
            f'fill="{ITEM_FILL}" stroke="{ITEM_STROKE}" stroke-width="2"/>'
        )
        if options.show_fronts:
            fb = item.footprint.bounds
            half = 0.5 * min(fb[2] - fb[0], fb[3] - fb[1])
            tip = item.position + item.front_world * (half + 0.18)
            base = item.position + item.front_world * half * 0.4
            x1, y1 = c.pt(float(base[0]), float(base[1]))
            x2, y2 = c.pt(float(tip[0]), float(tip[1]))
            side = rot90(item.front_world) * 0.09
            wing = item.position + item.front_world * (half + 0.02)
            wx1, wy1 = c.pt(float(wing[0] + side[0]), float(wing[1] + side[1]))
            wx2, wy2 = c.pt(float(wing[0] - side[0]), float(wing[1] - side[1]))
            parts.append(
                f'<line class="front" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                f'stroke="{FRONT_COLOR}" stroke-width="2"/>'
            )
            parts.append(
                f'<polygon class="front-head" points="{x2},{y2} {wx1},{wy1} {wx2},{wy2}" '
                f'fill="{FRONT_COLOR}"/>'
            )
    if options.show_centers:
        ox, oy = c.pt(float(room.center[0]), float(room.center[1]))
        parts.append(
            f'<circle class="room-center" cx="{ox}" cy="{oy}" r="5" fill="{CENTER_ROOM_COLOR}"/>'
        )
        if placed:
            total = sum(p.area for p in placed)
            mean = sum((p.area * p.position for p in placed), start=np.zeros(2)) / total
            mx, my = c.pt(float(mean[0]), float(mean[1]))
            parts.append(
                f'<circle class="layout-center" cx="{mx}" cy="{my}" r="5" fill="{CENTER_LAYOUT_COLOR}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, placed, room, catalog=None, options: RenderOptions = RenderOptions()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_svg(placed, room, catalog, options))
