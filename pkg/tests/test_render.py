import xml.etree.ElementTree as ET

import numpy as np
import pytest

from furnish.geometry import vec2
from furnish.render import RenderOptions, render_svg
from furnish.scene import PlacedItem, default_catalog, default_room


def parse(svg_text):
    return ET.fromstring(svg_text)


def elements_with_class(root, name):
    return [el for el in root.iter() if el.get("class") == name]


def demo_layout():
    cat = default_catalog()
    room = default_room("l_shape")
    placed = [
        PlacedItem.place(cat.get("bed"), vec2(2, 2), 1),
        PlacedItem.place(cat.get("desk"), vec2(6, 1.5), 0),
        PlacedItem.place(cat.get("chair"), vec2(6, 2.6), 2),
    ]
    return cat, room, placed


def test_empty_layout_room_and_doors_only():
    cat, room, _ = demo_layout()
    svg = render_svg([], room, cat)
    root = parse(svg)  # well-formed XML
    assert len(elements_with_class(root, "room")) == 1
    assert len(elements_with_class(root, "door")) == 1
    assert len(elements_with_class(root, "item")) == 0
    assert len(elements_with_class(root, "layout-center")) == 0


def test_one_shape_per_item_and_one_arrow():
    cat, room, placed = demo_layout()
    svg = render_svg(placed, room, cat)
    root = parse(svg)
    assert len(elements_with_class(root, "item")) == 3
    assert len(elements_with_class(root, "front")) == 3
    assert len(elements_with_class(root, "room-center")) == 1
    assert len(elements_with_class(root, "layout-center")) == 1

    single = render_svg(placed[:1], room, cat)
    assert len(elements_with_class(parse(single), "front")) == 1


def test_deterministic_output():
    cat, room, placed = demo_layout()
    a = render_svg(placed, room, cat)
    b = render_svg(placed, room, cat)
    assert a == b
    assert a.encode() == b.encode()


def test_access_strips_rendered_when_enabled():
    cat, room, placed = demo_layout()
    options = RenderOptions(show_access=True)
    svg = render_svg(placed, room, cat, options)
    root = parse(svg)
    # bed: front + left + right clearances; desk: front; chair: back
    assert len(elements_with_class(root, "access")) == 5


def test_options_toggle_elements():
    cat, room, placed = demo_layout()
    bare = render_svg(placed, room, cat, RenderOptions(show_centers=False, show_fronts=False))
    root = parse(bare)
    assert elements_with_class(root, "front") == []
    assert elements_with_class(root, "room-center") == []
    assert len(elements_with_class(root, "item")) == 3


def test_scale_validation():
    with pytest.raises(ValueError):
        RenderOptions(scale=0)
