"""Oriented-rectangle overlap via the separating axis theorem."""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple


def footprint(x: float, y: float, heading: float, length: float, width: float):
    """Corners of a centered rectangle, counter-clockwise."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = length / 2, width / 2
    ax, ay = c * hl, s * hl
    bx, by = -s * hw, c * hw
    return ((x + ax + bx, y + ay + by), (x - ax + bx, y - ay + by),
            (x - ax - bx, y - ay - by), (x + ax - bx, y + ay - by))


def _separated_on(axis_x, axis_y, pa, pb) -> bool:
    da = [px * axis_x + py * axis_y for px, py in pa]
    db = [px * axis_x + py * axis_y for px, py in pb]
    return max(da) < min(db) or max(db) < min(da)


def rectangles_overlap(a: Sequence[float], b: Sequence[float]) -> bool:
    """Overlap test for two ``(x, y, heading, length, width)`` rectangles.

    Touching boundaries count as overlap.
    """
    ax, ay, ah, al, aw = a
    bx, by, bh, bl, bw = b
    reach = 0.5 * (math.hypot(al, aw) + math.hypot(bl, bw))
    if (ax - bx) ** 2 + (ay - by) ** 2 > reach * reach:
        return False
    pa = footprint(*a)
    pb = footprint(*b)
    for h in (ah, bh):
        c, s = math.cos(h), math.sin(h)
        if _separated_on(c, s, pa, pb) or _separated_on(-s, c, pa, pb):
            return False
    return True


def vehicle_rect(v) -> Tuple[float, float, float, float, float]:
    return (v.x, v.y, v.heading, v.length, v.width)


def colliding_pairs(vehicles, only_index=None) -> List[Tuple[int, int]]:
    rects = [vehicle_rect(v) for v in vehicles]
    pairs = []
    n = len(rects)
    for i in range(n):
        for j in range(i + 1, n):
            if only_index is not None and only_index not in (i, j):
                continue
            if rectangles_overlap(rects[i], rects[j]):
                pairs.append((i, j))
    return pairs
