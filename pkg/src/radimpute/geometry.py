"""Planar predicates for topology-aware clustering and the venue simulator.

Points are ``(x, y)`` tuples in meters. Orientation tests snap values within
``SNAP`` of zero to zero, so a point within a nanometer of a boundary counts
as on it.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

SNAP = 1e-9

Point = tuple[float, float]
Ring = list[Point]


def orient(a: Point, b: Point, c: Point) -> int:
    """Sign of the turn a -> b -> c: +1 left, -1 right, 0 collinear."""
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    # scale tolerance with the operands so meter-scale inputs snap at ~1e-9 m
    scale = max(abs(b[0] - a[0]), abs(b[1] - a[1]), abs(c[0] - a[0]), abs(c[1] - a[1]), 1.0)
    if abs(v) <= SNAP * scale:
        return 0
    return 1 if v > 0 else -1


def convex_hull(points: Sequence[Point]) -> Ring:
    """Counter-clockwise hull vertices (Andrew's monotone chain).

    Returns one point for coincident input, the two extremes for collinear
    input, otherwise a ring of >= 3 vertices without repeating the first.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if not pts:
        raise ValueError("convex_hull of an empty point set")
    if len(pts) <= 2:
        return pts

    def half(seq):
        chain: list[Point] = []
        for p in seq:
            while len(chain) >= 2 and orient(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower, upper = half(pts), half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        # every point collinear: keep the two extremes
        return [pts[0], pts[-1]]
    return hull


def _on_segment(p: Point, a: Point, b: Point) -> bool:
    return (min(a[0], b[0]) - SNAP <= p[0] <= max(a[0], b[0]) + SNAP
            and min(a[1], b[1]) - SNAP <= p[1] <= max(a[1], b[1]) + SNAP)


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """True when closed segments p1p2 and q1q2 share at least one point."""
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return ((d1 == 0 and _on_segment(p1, q1, q2)) or (d2 == 0 and _on_segment(p2, q1, q2))
            or (d3 == 0 and _on_segment(q1, p1, p2)) or (d4 == 0 and _on_segment(q2, p1, p2)))


def point_in_polygon(p: Point, ring: Ring) -> bool:
    """Closed point-in-polygon test; boundary points count as inside."""
    n = len(ring)
    inside = False
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        if orient(a, b, p) == 0 and _on_segment(p, a, b):
            return True
        if (a[1] > p[1]) != (b[1] > p[1]):
            x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x > p[0]:
                inside = not inside
    return inside


def _edges(ring: Ring):
    n = len(ring)
    if n == 1:
        return [(ring[0], ring[0])]
    if n == 2:
        return [(ring[0], ring[1])]
    return [(ring[i], ring[(i + 1) % n]) for i in range(n)]


def bbox(ring: Ring) -> tuple[float, float, float, float]:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    return min(xs), min(ys), max(xs), max(ys)


def _bbox_overlap(a, b) -> bool:
    return not (a[2] < b[0] - SNAP or b[2] < a[0] - SNAP or a[3] < b[1] - SNAP or b[3] < a[1] - SNAP)


def shapes_intersect(shape: Ring, polygon: Ring) -> bool:
    """Closed intersection test between a hull (point, segment or convex ring) and a simple polygon."""
    if not _bbox_overlap(bbox(shape), bbox(polygon)):
        return False
    for a, b in _edges(shape):
        for c, d in _edges(polygon):
            if segments_intersect(a, b, c, d):
                return True
    # no boundary contact: one must contain the other, or they are disjoint
    if point_in_polygon(shape[0], polygon):
        return True
    return len(shape) >= 3 and point_in_polygon(polygon[0], shape)


def segment_hits_polygon(a: Point, b: Point, polygon: Ring) -> bool:
    return shapes_intersect([a, b] if a != b else [a], polygon)


class MultiPolygon:
    """Walls and obstacles: a list of simple counter-clockwise rings."""

    def __init__(self, polygons: Sequence[Sequence[Point]] = ()):
        self.polygons: list[Ring] = []
        for ring in polygons:
            ring = [(float(x), float(y)) for x, y in ring]
            if len(ring) > 1 and ring[0] == ring[-1]:
                ring = ring[:-1]
            if len(ring) < 3:
                raise ValueError("polygon rings need at least 3 vertices")
            if _signed_area(ring) < 0:
                ring.reverse()
            self.polygons.append(ring)
        self.boxes = [bbox(r) for r in self.polygons]

    def __len__(self):
        return len(self.polygons)

    def intersects(self, shape: Ring) -> bool:
        box = bbox(shape)
        return any(_bbox_overlap(box, pb) and shapes_intersect(shape, ring)
                   for ring, pb in zip(self.polygons, self.boxes))

    def count_crossed(self, a: Point, b: Point) -> int:
        """Number of polygons touched by segment ab."""
        seg = [a, b] if a != b else [a]
        box = bbox(seg)
        return sum(1 for ring, pb in zip(self.polygons, self.boxes)
                   if _bbox_overlap(box, pb) and shapes_intersect(seg, ring))

    def to_geojson(self) -> dict:
        return {"type": "MultiPolygon",
                "coordinates": [[[list(p) for p in ring + ring[:1]]] for ring in self.polygons]}

    @classmethod
    def from_geojson(cls, obj) -> "MultiPolygon":
        if obj.get("type") == "Polygon":
            return cls([obj["coordinates"][0]])
        if obj.get("type") != "MultiPolygon":
            raise ValueError(f"expected a GeoJSON MultiPolygon, got {obj.get('type')!r}")
        # holes are ignored: walls are solid
        return cls([poly[0] for poly in obj["coordinates"]])

    @classmethod
    def load(cls, path) -> "MultiPolygon":
        return cls.from_geojson(json.loads(Path(path).read_text()))


def _signed_area(ring: Ring) -> float:
    return 0.5 * sum(ring[i][0] * ring[(i + 1) % len(ring)][1] - ring[(i + 1) % len(ring)][0] * ring[i][1]
                     for i in range(len(ring)))


def entity_exist(cluster_points: Sequence[Point], topology: MultiPolygon) -> bool:
    """True when the convex hull of the points touches any wall or obstacle."""
    return topology.intersects(convex_hull(cluster_points))


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Ring:
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
