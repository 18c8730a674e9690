from .collision import footprint, rectangles_overlap
from .dynamics import (A_MAX, STEER_MAX, SvBehaviorConfig, VehicleState, apply_control,
                       idm_acceleration)
from .road import (ROADS, ConflictZone, GeometryConfig, GeometryError, RoadNetwork, Route,
                   build_intersection, legal_exits, turn_kind)
from .world import (SpawnConfig, SpawnError, WorldState, detect_collisions, env_step, off_road,
                    place_on_route, pursuit_steer, spawn_scenario, sv_policy_step,
                    write_trajectory_csv)

__all__ = [
    "A_MAX", "STEER_MAX", "ROADS", "ConflictZone", "GeometryConfig", "GeometryError",
    "RoadNetwork", "Route", "SpawnConfig", "SpawnError", "SvBehaviorConfig", "VehicleState",
    "WorldState", "apply_control", "build_intersection", "detect_collisions", "env_step",
    "footprint", "idm_acceleration", "legal_exits", "off_road", "place_on_route",
    "pursuit_steer", "rectangles_overlap", "spawn_scenario", "sv_policy_step", "turn_kind",
    "write_trajectory_csv",
]
