"""Four-way intersection geometry: lanes, routes and conflict zones.

World frame has its origin at the junction center, x pointing east and y
pointing north. Traffic drives on the right. Each approach road carries one
lane per direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

# Counter-clockwise order; index + 1 is a right turn, + 2 straight, + 3 left.
ROADS = ("S", "E", "N", "W")
OUTWARD = {"S": (0.0, -1.0), "E": (1.0, 0.0), "N": (0.0, 1.0), "W": (-1.0, 0.0)}

RouteId = Tuple[str, str]


class GeometryError(ValueError):
    """Raised for an invalid intersection layout."""


@dataclass(frozen=True)
class GeometryConfig:
    lane_width: float = 4.0
    arm_length: float = 60.0
    junction_half: float = 12.0
    vehicle_length: float = 5.0
    vehicle_width: float = 2.0
    wheelbase: float = 3.0
    sample_spacing: float = 0.25
    # distance between route centerlines below which two paths conflict
    conflict_distance: float = 3.5

    def validate(self) -> None:
        for name in ("lane_width", "arm_length", "junction_half", "vehicle_length",
                     "vehicle_width", "wheelbase", "sample_spacing", "conflict_distance"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.lane_width <= self.vehicle_width:
            raise GeometryError("lane width must exceed vehicle width")
        if self.arm_length <= 2 * (2 * self.junction_half):
            raise GeometryError("arm length must exceed twice the junction size")
        if self.junction_half <= self.lane_width / 2:
            raise GeometryError("junction box too small for the turn arcs")
        if self.sample_spacing > 0.5:
            raise GeometryError("sample spacing above 0.5 m")


def turn_kind(entry: str, exit_: str) -> str:
    k = (ROADS.index(exit_) - ROADS.index(entry)) % 4
    return {1: "right", 2: "straight", 3: "left"}.get(k, "uturn")


def legal_exits(entry: str) -> Tuple[str, ...]:
    return tuple(r for r in ROADS if r != entry)


class _Line:
    __slots__ = ("x0", "y0", "dx", "dy", "length", "heading")

    def __init__(self, x0, y0, heading, length):
        self.x0, self.y0 = x0, y0
        self.heading = heading
        self.dx, self.dy = math.cos(heading), math.sin(heading)
        self.length = length

    def point(self, s):
        return self.x0 + self.dx * s, self.y0 + self.dy * s, self.heading

    def project(self, x, y):
        """Return (local s unclamped, signed lateral offset, left positive)."""
        px, py = x - self.x0, y - self.y0
        return px * self.dx + py * self.dy, self.dx * py - self.dy * px


class _Arc:
    __slots__ = ("cx", "cy", "radius", "a0", "sign", "length")

    def __init__(self, cx, cy, radius, a0, sweep):
        self.cx, self.cy, self.radius = cx, cy, radius
        self.a0 = a0
        self.sign = 1.0 if sweep > 0 else -1.0
        self.length = abs(sweep) * radius

    def point(self, s):
        a = self.a0 + self.sign * s / self.radius
        return (self.cx + self.radius * math.cos(a), self.cy + self.radius * math.sin(a),
                a + self.sign * math.pi / 2)

    def project(self, x, y):
        px, py = x - self.cx, y - self.cy
        r = math.hypot(px, py)
        da = math.atan2(py, px) - self.a0
        da = (da + math.pi) % (2 * math.pi) - math.pi
        # counter-clockwise arcs keep the center on the left
        lateral = self.sign * (self.radius - r)
        return self.sign * da * self.radius, lateral


class Route:
    """Centerline of one (entry, exit) movement: approach line, turn, exit line.

    The first and last straight segments extend indefinitely for projection
    and lookahead, so vehicles may leave the mapped area without the
    geometry breaking down.
    """

    def __init__(self, rid: RouteId, segments, junction_start: float, junction_end: float,
                 spacing: float):
        self.id = rid
        self.segments = segments
        self._starts = []
        total = 0.0
        for seg in segments:
            self._starts.append(total)
            total += seg.length
        self.length = total
        self.junction_start = junction_start
        self.junction_end = junction_end
        n = int(math.ceil(total / spacing)) + 1
        s = np.linspace(0.0, total, n)
        pts = np.array([self.point(si)[:2] for si in s])
        self.stations = s
        self.polyline = pts

    @property
    def entry(self) -> str:
        return self.id[0]

    @property
    def exit(self) -> str:
        return self.id[1]

    def point(self, s: float):
        """(x, y, heading) at arc length ``s``; extrapolates beyond both ends."""
        segs = self.segments
        if s <= 0.0:
            return segs[0].point(s)
        for seg, s0 in zip(segs, self._starts):
            if s - s0 <= seg.length:
                return seg.point(s - s0)
        last = segs[-1]
        return last.point(s - self._starts[-1])

    def project(self, x: float, y: float):
        """Closest station on the (extended) route: ``(s, lateral)``."""
        best = None
        nseg = len(self.segments)
        for k, (seg, s0) in enumerate(zip(self.segments, self._starts)):
            t, lat = seg.project(x, y)
            if t < 0.0 and k > 0:
                t = 0.0
            elif t > seg.length and k < nseg - 1:
                t = seg.length
            px, py, _ = seg.point(t)
            d2 = (px - x) ** 2 + (py - y) ** 2
            if best is None or d2 < best[0]:
                best = (d2, s0 + t, lat)
        return best[1], best[2]


@dataclass(frozen=True)
class ConflictZone:
    """Arc-length interval on the first route of a pair that overlaps the second."""
    enter: float
    exit: float
    merge: bool


@dataclass
class RoadNetwork:
    config: GeometryConfig
    routes: Dict[RouteId, Route]
    conflicts: Dict[Tuple[RouteId, RouteId], ConflictZone] = field(default_factory=dict)

    def lane_centerline(self, road: str, incoming: bool):
        """Return (point on the lane at the box edge, unit travel direction)."""
        cfg = self.config
        ux, uy = OUTWARD[road]
        dx, dy = (-ux, -uy) if incoming else (ux, uy)
        rx, ry = dy, -dx
        o = cfg.lane_width / 2
        return (ux * cfg.junction_half + rx * o, uy * cfg.junction_half + ry * o), (dx, dy)

    def goal_station(self, rid: RouteId, offset: float) -> float:
        return self.routes[rid].junction_end + offset

    def adjacent_lane(self, rid: RouteId, side: str) -> Optional[RouteId]:
        # one lane per direction: there is never a same-direction neighbour
        return None

    def distance_to_surface(self, x: float, y: float) -> float:
        """Euclidean distance from a point to the paved area (0 when inside)."""
        cfg = self.config
        j = cfg.junction_half
        far = j + cfg.arm_length
        half = cfg.lane_width
        ax, ay = abs(x), abs(y)
        d_box = math.hypot(max(ax - j, 0.0), max(ay - j, 0.0))
        # vertical arms (N/S): |x| <= half, j <= |y| <= far
        d_v = math.hypot(max(ax - half, 0.0), max(j - ay, 0.0, ay - far))
        d_h = math.hypot(max(ay - half, 0.0), max(j - ax, 0.0, ax - far))
        return min(d_box, d_v, d_h)


def _build_route(cfg: GeometryConfig, entry: str, exit_: str) -> Route:
    j, a, o = cfg.junction_half, cfg.arm_length, cfg.lane_width / 2
    ux, uy = OUTWARD[entry]
    dx, dy = -ux, -uy
    # entry point at the box edge, on the incoming (right-hand) lane
    ex, ey = ux * j + dy * o, uy * j - dx * o
    h_in = math.atan2(dy, dx)
    approach = _Line(ex - dx * a, ey - dy * a, h_in, a)

    vx, vy = OUTWARD[exit_]
    qx, qy = vx * j + vy * o, vy * j - vx * o
    h_out = math.atan2(vy, vx)

    kind = turn_kind(entry, exit_)
    if kind == "straight":
        turn = _Line(ex, ey, h_in, 2 * j)
    elif kind == "right":
        r = j - o
        cx, cy = ex + dy * r, ey - dx * r
        turn = _Arc(cx, cy, r, math.atan2(ey - cy, ex - cx), -math.pi / 2)
    elif kind == "left":
        r = j + o
        cx, cy = ex - dy * r, ey + dx * r
        turn = _Arc(cx, cy, r, math.atan2(ey - cy, ex - cx), math.pi / 2)
    else:
        raise GeometryError(f"no route from {entry} to {exit_}")
    leave = _Line(qx, qy, h_out, a)
    return Route((entry, exit_), [approach, turn, leave], a, a + turn.length,
                 cfg.sample_spacing)


def _conflict(ra: Route, rb: Route, cfg: GeometryConfig, tree_b) -> Optional[ConflictZone]:
    d, _ = tree_b.query(ra.polyline)
    touching = np.flatnonzero(d < 0.3)
    if touching.size == 0:
        return None
    k = touching[0]
    close = d < cfg.conflict_distance
    lo = k
    while lo > 0 and close[lo - 1]:
        lo -= 1
    hi = k
    while hi < len(d) - 1 and close[hi + 1]:
        hi += 1
    merge = ra.exit == rb.exit
    s_touch = ra.stations[k]
    s_out = s_touch + cfg.vehicle_length if merge else ra.stations[hi]
    return ConflictZone(float(ra.stations[lo]), float(s_out), merge)


@lru_cache(maxsize=8)
def build_intersection(config: GeometryConfig = GeometryConfig()) -> RoadNetwork:
    """Build the road network for ``config``.

    The result is cached per config; treat it as read-only.
    """
    config.validate()
    routes = {}
    for entry in ROADS:
        for exit_ in legal_exits(entry):
            routes[(entry, exit_)] = _build_route(config, entry, exit_)
    trees = {rid: cKDTree(r.polyline) for rid, r in routes.items()}
    conflicts = {}
    for ia, ra in routes.items():
        for ib, rb in routes.items():
            if ra.entry == rb.entry:
                continue
            zone = _conflict(ra, rb, config, trees[ib])
            if zone is not None:
                conflicts[(ia, ib)] = zone
    return RoadNetwork(config, routes, conflicts)
