import xml.etree.ElementTree as ET

import numpy as np
import pytest

from itpla.geometry import SimplePolygon
from itpla.model import ModuleShape, Placement
from itpla.render import overlap_regions, protrusions, render_svg, save_svg

TRI = ModuleShape("triangle", 1.0)
CIRC = ModuleShape("circle", 1.0)
BOX = SimplePolygon([(-3, -3), (3, -3), (3, 3), (-3, 3)])
NS = "{http://www.w3.org/2000/svg}"


def census(svg: str) -> dict:
    root = ET.fromstring(svg)
    counts = {}
    for el in root.iter():
        cls = el.get("class")
        if cls:
            counts[cls] = counts.get(cls, 0) + 1
    return counts


def place(shape, centers, thetas=None, poly=BOX):
    n = len(centers)
    thetas = np.zeros(n) if thetas is None else thetas
    return Placement(poly, shape, np.arange(n), centers, thetas)


def test_empty_has_only_boundary():
    assert census(render_svg(Placement.empty(BOX, TRI))) == {"boundary": 1}


def test_single_triangle():
    assert census(render_svg(place(TRI, [(0, 0)]))) == {"boundary": 1, "module": 1, "connector": 3}


def test_overlapping_pair():
    c = census(render_svg(place(TRI, [(0, 0), (0.2, 0)])))
    assert c == {"boundary": 1, "module": 2, "connector": 6, "overlap": 1}


def test_circles_have_no_connectors():
    c = census(render_svg(place(CIRC, [(0, 0), (1.5, 0)])))
    assert c == {"boundary": 1, "module": 2, "overlap": 1}


def test_protrusion_drawn():
    p = place(TRI, [(2.9, 0)])
    assert len(protrusions(p)) == 1
    assert census(render_svg(p))["protrusion"] == 1


def test_touching_pair_has_no_overlap():
    r = TRI.inradius
    p = place(TRI, [(0, 0), (0, -2 * r)], [0.0, np.pi])
    assert overlap_regions(p) == []


def test_title_escaped(tmp_path):
    out = tmp_path / "x.svg"
    save_svg(place(TRI, [(0, 0)]), out, title="a < b")
    root = ET.parse(out).getroot()
    assert root.find(f"{NS}title").text == "a < b"


def test_deterministic():
    p = place(TRI, [(0, 0), (0.3, 0.1)], np.array([0.2, 1.1]))
    assert render_svg(p) == render_svg(p)


@pytest.mark.parametrize("shape", [TRI, CIRC])
def test_viewbox_contains_modules(shape):
    p = place(shape, [(5, 5)])
    root = ET.fromstring(render_svg(p))
    x, y, w, h = map(float, root.get("viewBox").split())
    # y is flipped in the drawing
    assert x <= 5 - shape.circumradius and x + w >= 5 + shape.circumradius
    assert y <= -5 - shape.circumradius
