"""Exact 2-D predicates for patch rejection sampling.

Conventions:
  - A point is a float pair (x, y) in pixel coordinates.
  - A ring is a closed polygon given as a vertex sequence (last edge wraps).
  - A rect is (x0, y0, x1, y1) with x0 < x1, y0 < y1; it denotes the
    half-open region [x0, x1) x [y0, y1), so rects that merely share an
    edge do not overlap.
  - Point-in-polygon uses the nonzero winding rule; an instance made of
    several rings is the union of its rings.
"""

from __future__ import annotations

from typing import Sequence

Point = tuple[float, float]
Ring = Sequence[Point]
Rect = tuple[float, float, float, float]

# Clipped slivers thinner than this are treated as zero-area contact.
AREA_EPS = 1e-9


def ring_area(ring: Ring) -> float:
    """Signed shoelace area (positive for counter-clockwise rings)."""
    acc = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def point_in_ring(x: float, y: float, ring: Ring) -> bool:
    """Nonzero winding number test."""
    wn = 0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        # cross > 0: point left of the directed edge
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y:
            if y1 > y and cross > 0:
                wn += 1
        elif y1 <= y and cross < 0:
            wn -= 1
    return wn != 0


def point_in_polygon(x: float, y: float, rings: Sequence[Ring]) -> bool:
    return any(point_in_ring(x, y, ring) for ring in rings)


def ring_bbox(rings: Sequence[Ring]) -> Rect:
    xs = [x for ring in rings for x, _ in ring]
    ys = [y for ring in rings for _, y in ring]
    return min(xs), min(ys), max(xs), max(ys)


def _clip_halfplane(poly: list[Point], inside, intersect) -> list[Point]:
    out: list[Point] = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        cur_in, nxt_in = inside(cur), inside(nxt)
        if cur_in:
            out.append(cur)
            if not nxt_in:
                out.append(intersect(cur, nxt))
        elif nxt_in:
            out.append(intersect(cur, nxt))
    return out


def clip_ring_to_rect(ring: Ring, rect: Rect) -> list[Point]:
    """Sutherland-Hodgman clip of an arbitrary ring against a rectangle."""
    x0, y0, x1, y1 = rect

    def cut_x(c, p, q, ):
        t = (c - p[0]) / (q[0] - p[0])
        return (c, p[1] + t * (q[1] - p[1]))

    def cut_y(c, p, q):
        t = (c - p[1]) / (q[1] - p[1])
        return (p[0] + t * (q[0] - p[0]), c)

    poly = list(ring)
    for inside, intersect in (
        (lambda p: p[0] >= x0, lambda p, q: cut_x(x0, p, q)),
        (lambda p: p[0] <= x1, lambda p, q: cut_x(x1, p, q)),
        (lambda p: p[1] >= y0, lambda p, q: cut_y(y0, p, q)),
        (lambda p: p[1] <= y1, lambda p, q: cut_y(y1, p, q)),
    ):
        if not poly:
            return []
        poly = _clip_halfplane(poly, inside, intersect)
    return poly


def rect_ring_intersection_area(ring: Ring, rect: Rect) -> float:
    """Unsigned area of ring ∩ rect (exact for simple rings)."""
    return abs(ring_area(clip_ring_to_rect(ring, rect)))


def rect_intersects_polygon(rect: Rect, rings: Sequence[Ring]) -> bool:
    """True when the rect has positive-area intersection with any ring."""
    rx0, ry0, rx1, ry1 = rect
    for ring in rings:
        bx0, by0, bx1, by1 = ring_bbox([ring])
        if bx1 <= rx0 or bx0 >= rx1 or by1 <= ry0 or by0 >= ry1:
            continue
        if rect_ring_intersection_area(ring, rect) > AREA_EPS:
            return True
    return False


def rects_overlap(a: Rect, b: Rect) -> bool:
    """Positive-area intersection of half-open rects; shared edges allowed."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1
