"""Decision-process layer on top of the intersection simulator.

Observations, the five high-level actions and their low-level realization,
event-driven rewards, termination, and a small episode driver
(:class:`IntersectionTask`) used by the trainer and the evaluator.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass, fields
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .env import (GeometryConfig, RoadNetwork, SpawnConfig, SvBehaviorConfig, VehicleState,
                  WorldState, build_intersection, detect_collisions, env_step, off_road,
                  pursuit_steer, spawn_scenario)
from .env.dynamics import clamp

N_FEATURES = 6


class Action(enum.IntEnum):
    LANE_LEFT = 0
    KEEP = 1
    LANE_RIGHT = 2
    DECELERATE = 3
    ACCELERATE = 4


N_ACTIONS = len(Action)


class Outcome(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    OFF_ROAD = "off_road"


@dataclass(frozen=True)
class TaskConfig:
    dt: float = 0.1
    decision_steps: int = 2
    speed_step: float = 1.5
    v_max: float = 12.0
    goal_radius: float = 4.0
    goal_offset: float = 20.0
    speed_gain: float = 2.0
    lookahead_base: float = 4.0
    lookahead_gain: float = 0.5


@dataclass(frozen=True)
class RewardConfig:
    """Coefficients of the event-driven reward.

    ``alpha1`` scales the success bonus by completion time and squared SV
    count; ``alpha3`` scales the collision penalty by ego speed and squared
    SV count. ``alpha1`` is positive so that clearing denser traffic pays
    more, which is what lets the bandit move on to harder scenarios.
    """
    alpha1: float = 2.0
    alpha2: float = 5.0
    alpha3: float = -0.05
    alpha4: float = -5.0
    timeout: float = -5.0
    off_road: float = -5.0
    lane_change: float = -0.2
    survival: float = 0.05
    t_c_max: float = 20.0

    def validate(self) -> None:
        if not self.t_c_max > 0:
            raise ValueError("t_c_max must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    success: float = 0.0
    collision: float = 0.0
    timeout: float = 0.0
    off_road: float = 0.0
    lane_change: float = 0.0
    survival: float = 0.0

    @property
    def total(self) -> float:
        return (self.success + self.collision + self.timeout + self.off_road
                + self.lane_change + self.survival)


@dataclass(frozen=True)
class EpisodeOutcome:
    status: Outcome
    t_c: float
    n_lc: int = 0
    terminal_speed: float = 0.0

    @property
    def terminal(self) -> bool:
        return self.status is not Outcome.RUNNING


@dataclass(frozen=True)
class ControlTarget:
    lane: Tuple[str, str]
    speed: float


def observe(world: WorldState, n_max: int) -> np.ndarray:
    """Kinematic feature matrix, ego first, SVs nearest-first, zero padded."""
    if len(world.svs) > n_max:
        raise ValueError(f"{len(world.svs)} SVs exceed n_max={n_max}")
    obs = np.zeros((n_max + 1, N_FEATURES))
    ego = world.ego
    order = sorted(world.svs, key=lambda v: (v.x - ego.x) ** 2 + (v.y - ego.y) ** 2)
    for row, v in enumerate([ego, *order]):
        c, s = math.cos(v.heading), math.sin(v.heading)
        obs[row] = (v.x, v.y, v.speed * c, v.speed * s, s, c)
    return obs


def decode_action(action: int, ego: VehicleState, network: RoadNetwork,
                  target: ControlTarget, cfg: TaskConfig = TaskConfig()
                  ) -> Tuple[ControlTarget, bool]:
    """Map a high-level action onto new control targets.

    Returns ``(target, lane_changed)``. Lane changes are honoured only on the
    straight approach/exit segments and only toward a same-direction lane;
    otherwise they degrade to ``KEEP``.
    """
    action = Action(action)
    if action is Action.ACCELERATE:
        return ControlTarget(target.lane, min(target.speed + cfg.speed_step, cfg.v_max)), False
    if action is Action.DECELERATE:
        return ControlTarget(target.lane, max(target.speed - cfg.speed_step, 0.0)), False
    if action in (Action.LANE_LEFT, Action.LANE_RIGHT):
        route = network.routes[target.lane]
        in_junction = route.junction_start <= ego.progress <= route.junction_end
        side = "left" if action is Action.LANE_LEFT else "right"
        lane = None if in_junction else network.adjacent_lane(target.lane, side)
        if lane is not None:
            return ControlTarget(lane, target.speed), True
    return target, False


def low_level_control(ego: VehicleState, target: ControlTarget, network: RoadNetwork,
                      cfg: TaskConfig = TaskConfig(),
                      limits: SvBehaviorConfig = SvBehaviorConfig()) -> Tuple[float, float]:
    """Proportional speed control plus pure-pursuit lane tracking."""
    accel = clamp(cfg.speed_gain * (target.speed - ego.speed), -limits.a_max, limits.a_max)
    look = cfg.lookahead_base + cfg.lookahead_gain * ego.speed
    steer = pursuit_steer(ego, network.routes[target.lane], look, limits.steer_max)
    return accel, steer


def goal_anchor(world: WorldState, cfg: TaskConfig) -> Tuple[float, float]:
    rid = world.ego.route
    x, y, _ = world.network.routes[rid].point(world.network.goal_station(rid, cfg.goal_offset))
    return x, y


def terminal_check(world: WorldState, reward_cfg: RewardConfig = RewardConfig(),
                   cfg: TaskConfig = TaskConfig(), n_lc: int = 0) -> EpisodeOutcome:
    """Classify the world; precedence Collision > OffRoad > Success > Timeout."""
    ego = world.ego
    t = world.time
    if detect_collisions(world, ego_only=True):
        status = Outcome.COLLISION
    elif off_road(world):
        status = Outcome.OFF_ROAD
    elif math.dist((ego.x, ego.y), goal_anchor(world, cfg)) <= cfg.goal_radius:
        status = Outcome.SUCCESS
    # small slack so that accumulated dt rounding cannot skip the limit
    elif t >= reward_cfg.t_c_max - 1e-9:
        status = Outcome.TIMEOUT
    else:
        status = Outcome.RUNNING
    return EpisodeOutcome(status, min(t, reward_cfg.t_c_max), n_lc, ego.speed)


class InconsistentOutcome(ValueError):
    """The outcome passed to the reward does not match the world."""


def compute_reward(prev_world: Optional[WorldState], world: WorldState, outcome: EpisodeOutcome,
                   n_lc_delta: int, cfg: RewardConfig = RewardConfig(),
                   task: TaskConfig = TaskConfig()) -> RewardBreakdown:
    """Reward of one decision step ending in ``world``."""
    check = terminal_check(world, cfg, task)
    if check.status is not outcome.status:
        raise InconsistentOutcome(f"outcome {outcome.status.value} but world is "
                                  f"{check.status.value}")
    if prev_world is not None and world.time < prev_world.time:
        raise InconsistentOutcome("world precedes prev_world")
    n_sv = len(world.svs)
    success = collision = timeout = offr = 0.0
    if outcome.status is Outcome.SUCCESS:
        success = cfg.alpha1 * (outcome.t_c / cfg.t_c_max) * n_sv ** 2 + cfg.alpha2
    elif outcome.status is Outcome.COLLISION:
        collision = cfg.alpha3 * world.ego.speed * n_sv ** 2 + cfg.alpha4
    elif outcome.status is Outcome.TIMEOUT:
        timeout = cfg.timeout
    elif outcome.status is Outcome.OFF_ROAD:
        offr = cfg.off_road
    return RewardBreakdown(success, collision, timeout, offr, cfg.lane_change * n_lc_delta,
                           cfg.survival)


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: RewardBreakdown
    outcome: EpisodeOutcome
    world: WorldState


class IntersectionTask:
    """Episode driver: one ``step`` is one decision held for several sim steps."""

    def __init__(self, n_sv_max: int = 6, geometry: GeometryConfig = GeometryConfig(),
                 behavior: SvBehaviorConfig = SvBehaviorConfig(),
                 spawn: Optional[SpawnConfig] = None, task: TaskConfig = TaskConfig(),
                 reward: RewardConfig = RewardConfig()):
        self.n_sv_max = n_sv_max
        self.network = build_intersection(geometry)
        self.behavior = behavior
        self.spawn = spawn if spawn is not None else SpawnConfig(n_sv_max=n_sv_max)
        self.task = task
        self.reward_cfg = reward
        self.world: Optional[WorldState] = None
        self.target: Optional[ControlTarget] = None
        self.n_lc = 0
        self.history: List[WorldState] = []
        self.record = False

    def reset(self, n_sv: int, rng: np.random.Generator, goal: Optional[str] = None) -> np.ndarray:
        self.world = spawn_scenario(n_sv, rng, self.network, self.spawn, self.behavior, goal)
        ego = self.world.ego
        self.target = ControlTarget(ego.route, ego.speed)
        self.n_lc = 0
        self.history = [self.world] if self.record else []
        return observe(self.world, self.n_sv_max)

    def step(self, action: int) -> StepResult:
        if self.world is None:
            raise RuntimeError("call reset() first")
        prev = self.world
        self.target, changed = decode_action(action, prev.ego, self.network, self.target,
                                             self.task)
        self.n_lc += int(changed)
        world = prev
        outcome = None
        for _ in range(self.task.decision_steps):
            control = low_level_control(world.ego, self.target, self.network, self.task,
                                        self.behavior)
            world = env_step(world, control, self.task.dt)
            if self.record:
                self.history.append(world)
            outcome = terminal_check(world, self.reward_cfg, self.task, self.n_lc)
            if outcome.terminal:
                break
        reward = compute_reward(prev, world, outcome, int(changed), self.reward_cfg, self.task)
        self.world = world
        return StepResult(observe(world, self.n_sv_max), reward, outcome, world)


REWARD_HEADER = ("step", "total", *(f.name for f in fields(RewardBreakdown)))


def write_reward_csv(path, breakdowns: List[RewardBreakdown]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REWARD_HEADER)
        for k, rb in enumerate(breakdowns):
            w.writerow((k, rb.total, *asdict(rb).values()))
