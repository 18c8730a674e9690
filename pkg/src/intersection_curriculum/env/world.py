"""World state, scenario spawning and the deterministic simulation step."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .collision import colliding_pairs, rectangles_overlap, vehicle_rect
from .dynamics import SvBehaviorConfig, VehicleState, apply_control, clamp, idm_acceleration
from .road import ROADS, RoadNetwork, legal_exits

# SVs never enter from the ego's road
SV_ENTRIES = ("E", "N", "W")
EGO_ENTRY = "S"


class SpawnError(RuntimeError):
    """No collision-free placement was found within the retry budget."""


@dataclass(frozen=True)
class SpawnConfig:
    n_sv_max: int = 6
    # distances measured back from the junction box edge, meters
    ego_distance: Tuple[float, float] = (20.0, 40.0)
    ego_speed: Tuple[float, float] = (4.0, 8.0)
    sv_distance: Tuple[float, float] = (10.0, 55.0)
    sv_speed: Tuple[float, float] = (6.0, 10.0)
    min_gap: float = 12.0
    retries: int = 100


@dataclass
class WorldState:
    time: float
    ego: VehicleState
    svs: List[VehicleState]
    network: RoadNetwork
    goal: str
    behavior: SvBehaviorConfig = field(default_factory=SvBehaviorConfig)
    rng: Optional[np.random.Generator] = None

    @property
    def vehicles(self) -> List[VehicleState]:
        return [self.ego, *self.svs]


def place_on_route(network: RoadNetwork, route, s: float, speed: float) -> VehicleState:
    cfg = network.config
    x, y, h = network.routes[route].point(s)
    return VehicleState(x, y, speed, h, route, s, cfg.vehicle_length, cfg.vehicle_width,
                        cfg.wheelbase)


def spawn_scenario(n_sv: int, rng: np.random.Generator, network: RoadNetwork,
                   config: SpawnConfig = SpawnConfig(),
                   behavior: SvBehaviorConfig = SvBehaviorConfig(),
                   goal: Optional[str] = None) -> WorldState:
    """Random initial world with ``n_sv`` surrounding vehicles.

    The ego starts on the south approach and is assigned one of the three
    legal exits (``goal`` overrides the draw). SVs start on the other three
    approaches with uniformly drawn legal routes.
    """
    if not 0 <= n_sv <= config.n_sv_max:
        raise ValueError(f"n_sv={n_sv} outside [0, {config.n_sv_max}]")
    arm = network.config.arm_length
    exits = legal_exits(EGO_ENTRY)
    if goal is None:
        goal = exits[int(rng.integers(len(exits)))]
    elif goal not in exits:
        raise ValueError(f"illegal ego goal {goal!r}")
    s = arm - rng.uniform(*config.ego_distance)
    ego = place_on_route(network, (EGO_ENTRY, goal), s, rng.uniform(*config.ego_speed))

    placed = [ego]
    svs = []
    for _ in range(n_sv):
        for _attempt in range(config.retries):
            entry = SV_ENTRIES[int(rng.integers(3))]
            ex = legal_exits(entry)
            route = (entry, ex[int(rng.integers(3))])
            s = arm - rng.uniform(*config.sv_distance)
            cand = place_on_route(network, route, s, rng.uniform(*config.sv_speed))
            if all(math.hypot(cand.x - v.x, cand.y - v.y) >= config.min_gap
                   and not rectangles_overlap(vehicle_rect(cand), vehicle_rect(v))
                   for v in placed):
                placed.append(cand)
                svs.append(cand)
                break
        else:
            raise SpawnError(f"could not place SV {len(svs) + 1} of {n_sv}")
    return WorldState(0.0, ego, svs, network, goal, behavior, rng)


def desired_speed(network: RoadNetwork, route, s: float, cfg: SvBehaviorConfig) -> float:
    r = network.routes[route]
    if r.junction_start - cfg.near_junction <= s <= r.junction_end + cfg.near_junction:
        return cfg.v0
    return cfg.v0_approach


def pursuit_steer(v: VehicleState, route, lookahead: float, steer_max: float) -> float:
    """Pure-pursuit steering toward the route point ``lookahead`` ahead."""
    tx, ty, _ = route.point(v.progress + lookahead)
    dx, dy = tx - v.x, ty - v.y
    ld = math.hypot(dx, dy)
    if ld < 1e-9:
        return 0.0
    alpha = math.atan2(dy, dx) - v.heading
    steer = math.atan2(2.0 * v.wheelbase * math.sin(alpha), ld)
    return clamp(steer, -steer_max, steer_max)


def _on_right(me_entry: str, other_entry: str) -> bool:
    return ROADS.index(other_entry) == (ROADS.index(me_entry) + 1) % 4


def _other_goes_first(me: VehicleState, eta_me: float, other: VehicleState,
                      eta_other: float) -> bool:
    if abs(eta_other - eta_me) > 1e-9:
        return eta_other < eta_me
    if _on_right(me.route[0], other.route[0]):
        return True
    if _on_right(other.route[0], me.route[0]):
        return False
    return ROADS.index(other.route[0]) < ROADS.index(me.route[0])


def _must_yield(network: RoadNetwork, me: VehicleState, other: VehicleState) -> Optional[float]:
    """Distance from ``me``'s front bumper to its stop point, or None."""
    zone = network.conflicts.get((me.route, other.route))
    if zone is None:
        return None
    their = network.conflicts[(other.route, me.route)]
    front = me.progress + 0.5 * me.length
    if front >= zone.enter:
        return None  # already committed
    rear_other = other.progress - 0.5 * other.length
    if rear_other > their.exit:
        return None
    eta_me = (zone.enter - front) / max(me.speed, 1.0)
    eta_other = max(0.0, their.enter - (other.progress + 0.5 * other.length)) / max(other.speed, 1.0)
    if not _other_goes_first(me, eta_me, other, eta_other):
        return None
    clear_other = (their.exit - rear_other) / max(other.speed, 1.0)
    if eta_me > clear_other + 1.0:
        return None
    return zone.enter - front


def sv_policy_step(world: WorldState, sv_index: int) -> Tuple[float, float]:
    """IDM longitudinal control plus pure-pursuit steering for one SV.

    The IDM is evaluated against every relevant obstacle (same-lane leader,
    stop point before a conflict zone owned by another vehicle) and the most
    restrictive acceleration wins.
    """
    cfg = world.behavior
    net = world.network
    me = world.svs[sv_index]
    route = net.routes[me.route]
    v0 = desired_speed(net, me.route, me.progress, cfg)
    acc = idm_acceleration(me.speed, math.inf, 0.0, cfg, v0)
    half_lane = 0.5 * net.config.lane_width
    for k, other in enumerate(world.vehicles):
        if k == sv_index + 1:
            continue
        dx, dy = other.x - me.x, other.y - me.y
        if dx * dx + dy * dy > 1e4:
            continue
        s_o, lat = route.project(other.x, other.y)
        ahead = s_o - me.progress
        if abs(lat) < half_lane and 0.0 < ahead < 100.0:
            _, _, h_route = route.point(s_o)
            c = math.cos(other.heading - h_route)
            if c > 0.5:
                gap = ahead - 0.5 * (me.length + other.length)
                acc = min(acc, idm_acceleration(me.speed, gap, other.speed * c, cfg, v0))
        stop = _must_yield(net, me, other)
        if stop is not None:
            acc = min(acc, idm_acceleration(me.speed, stop, 0.0, cfg, v0))
    look = cfg.lookahead_base + cfg.lookahead_gain * me.speed
    steer = pursuit_steer(me, route, look, cfg.steer_max)
    return clamp(acc, -cfg.a_max, cfg.a_max), steer


def _advance(net: RoadNetwork, v: VehicleState, accel: float, steer: float, dt: float,
             cfg: SvBehaviorConfig) -> VehicleState:
    out = apply_control(v, accel, steer, dt, cfg.a_max, cfg.steer_max)
    s, _ = net.routes[out.route].project(out.x, out.y)
    if s > out.progress:
        out.progress = s
    return out


def env_step(world: WorldState, ego_control: Tuple[float, float], dt: float) -> WorldState:
    """Advance every vehicle by ``dt``; SV controls use the pre-step world."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = world.behavior
    controls = [sv_policy_step(world, i) for i in range(len(world.svs))]
    svs = [_advance(world.network, sv, a, d, dt, cfg) for sv, (a, d) in zip(world.svs, controls)]
    ego = _advance(world.network, world.ego, ego_control[0], ego_control[1], dt, cfg)
    return replace(world, time=world.time + dt, ego=ego, svs=svs)


def detect_collisions(world: WorldState, ego_only: bool = False) -> List[Tuple[int, int]]:
    """Overlapping vehicle pairs; index 0 is the ego, SV ``k`` is ``k + 1``."""
    return colliding_pairs(world.vehicles, 0 if ego_only else None)


def off_road(world: WorldState, tolerance: float = 0.1) -> bool:
    return world.network.distance_to_surface(world.ego.x, world.ego.y) > tolerance


TRAJECTORY_HEADER = ("time", "vehicle_id", "x", "y", "speed", "heading")


def trajectory_rows(world: WorldState):
    for k, v in enumerate(world.vehicles):
        yield (round(world.time, 10), k, v.x, v.y, v.speed, v.heading)


def write_trajectory_csv(path, worlds: Iterable[WorldState]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for world in worlds:
            w.writerows(trajectory_rows(world))
