"""Vehicle state, kinematic bicycle integration and the IDM law."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

A_MAX = 8.0
STEER_MAX = math.radians(45.0)


@dataclass(frozen=True)
class SvBehaviorConfig:
    """IDM parameters for surrounding vehicles plus hard actuator limits.

    ``v0`` applies within ``near_junction`` meters of the junction box and
    inside it; ``v0_approach`` applies further out.
    """
    v0: float = 9.0
    v0_approach: float = 12.0
    T: float = 1.5
    s0: float = 2.0
    a: float = 3.0
    b: float = 5.0
    delta: float = 4.0
    a_max: float = A_MAX
    steer_max: float = STEER_MAX
    near_junction: float = 20.0
    lookahead_base: float = 4.0
    lookahead_gain: float = 0.5

    def validate(self) -> None:
        for name in ("v0", "v0_approach", "T", "s0", "a", "b", "delta", "a_max", "steer_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class VehicleState:
    x: float
    y: float
    speed: float
    heading: float
    route: Tuple[str, str]
    progress: float = 0.0
    length: float = 5.0
    width: float = 2.0
    wheelbase: float = 3.0

    def copy(self) -> "VehicleState":
        return VehicleState(self.x, self.y, self.speed, self.heading, self.route,
                            self.progress, self.length, self.width, self.wheelbase)


def clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def idm_acceleration(v: float, gap: float, v_lead: float, cfg: SvBehaviorConfig,
                     v0: Optional[float] = None) -> float:
    """IDM acceleration, clamped to ``[-a_max, a_max]``.

    ``gap`` is the bumper-to-bumper distance; pass ``math.inf`` for a free
    road. A nonpositive gap is an emergency and returns ``-a_max``.
    """
    v0 = cfg.v0 if v0 is None else v0
    free = 1.0 - (v / v0) ** cfg.delta
    if math.isinf(gap):
        acc = cfg.a * free
    elif gap <= 0.0:
        return -cfg.a_max
    else:
        dyn = v * cfg.T + v * (v - v_lead) / (2.0 * math.sqrt(cfg.a * cfg.b))
        s_star = cfg.s0 + max(0.0, dyn)
        acc = cfg.a * (free - (s_star / gap) ** 2)
    return clamp(acc, -cfg.a_max, cfg.a_max)


def apply_control(state: VehicleState, accel: float, steer: float, dt: float,
                  a_max: float = A_MAX, steer_max: float = STEER_MAX) -> VehicleState:
    """Advance one vehicle by ``dt`` with a kinematic bicycle model.

    Inputs are clamped first. Speed never goes negative: a braking vehicle
    stops partway through the step and stays put.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    accel = clamp(accel, -a_max, a_max)
    steer = clamp(steer, -steer_max, steer_max)
    v = state.speed
    v_new = v + accel * dt
    if v_new < 0.0:
        # stops at t* = -v / accel
        dist = v * v / (-2.0 * accel) if accel < 0 else 0.0
        v_new = 0.0
    else:
        dist = 0.5 * (v + v_new) * dt
    dpsi = dist * math.tan(steer) / state.wheelbase
    mid = state.heading + 0.5 * dpsi
    if abs(dpsi) > 1e-12:
        # chord of the traversed arc
        chord = 2.0 * math.sin(0.5 * dpsi) * dist / dpsi
    else:
        chord = dist
    out = state.copy()
    out.x = state.x + chord * math.cos(mid)
    out.y = state.y + chord * math.sin(mid)
    out.speed = v_new
    out.heading = math.remainder(state.heading + dpsi, 2 * math.pi)
    return out
