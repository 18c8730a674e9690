import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intersection_curriculum.env import (ROADS, GeometryConfig, GeometryError, SpawnConfig,
                                         SpawnError, SvBehaviorConfig, VehicleState, WorldState,
                                         apply_control, build_intersection, detect_collisions,
                                         env_step, idm_acceleration, legal_exits, off_road,
                                         place_on_route, rectangles_overlap, spawn_scenario,
                                         sv_policy_step, write_trajectory_csv)

from oracles import random_rectangle_pairs

CFG = SvBehaviorConfig()


@pytest.fixture(scope="module")
def net():
    return build_intersection(GeometryConfig())


def world_with(net, ego, svs=(), goal=None):
    return WorldState(0.0, ego, list(svs), net, goal or ego.route[1])


def parked_ego(net):
    # far down the south approach, stationary, out of everyone's way
    return place_on_route(net, ("S", "N"), -2000.0, 0.0)


# --- road network ---------------------------------------------------------

def test_default_network_has_twelve_routes(net):
    assert len(net.routes) == 12
    for entry in ROADS:
        exits = legal_exits(entry)
        assert len(exits) == 3 and entry not in exits
        for ex in exits:
            assert (entry, ex) in net.routes


@pytest.mark.parametrize("field,value", [("arm_length", 0.0), ("lane_width", -1.0),
                                         ("lane_width", 1.5), ("arm_length", 30.0)])
def test_invalid_geometry_rejected(field, value):
    with pytest.raises(GeometryError):
        build_intersection(replace(GeometryConfig(), **{field: value}))


def test_network_is_deterministic():
    a = build_intersection.__wrapped__(GeometryConfig())
    b = build_intersection.__wrapped__(GeometryConfig())
    for rid in a.routes:
        assert np.array_equal(a.routes[rid].polyline, b.routes[rid].polyline)
    assert a.conflicts == b.conflicts


def test_south_to_west_endpoints_on_lane_centerlines(net):
    g = net.config
    r = net.routes[("S", "W")]
    x0, y0, h0 = r.point(0.0)
    x1, y1, h1 = r.point(r.length)
    # northbound lane of the south arm is at x = +w/2, westbound lane of the west arm at y = +w/2
    assert x0 == pytest.approx(g.lane_width / 2, abs=1e-12)
    assert y0 == pytest.approx(-(g.junction_half + g.arm_length), abs=1e-12)
    assert y1 == pytest.approx(g.lane_width / 2, abs=1e-12)
    assert x1 == pytest.approx(-(g.junction_half + g.arm_length), abs=1e-9)
    assert h0 == pytest.approx(math.pi / 2)
    assert abs(math.remainder(h1 - math.pi, 2 * math.pi)) < 1e-12


def test_route_endpoints_match_lane_centerline_helper(net):
    for (entry, ex), r in net.routes.items():
        (px, py), (dx, dy) = net.lane_centerline(entry, incoming=True)
        x0, y0, _ = r.point(0.0)
        assert abs((x0 - px) * dy - (y0 - py) * dx) < 1e-9
        (px, py), (dx, dy) = net.lane_centerline(ex, incoming=False)
        x1, y1, _ = r.point(r.length)
        assert abs((x1 - px) * dy - (y1 - py) * dx) < 1e-9


def test_polylines_continuous_and_on_road(net):
    g = net.config
    for r in net.routes.values():
        steps = np.hypot(*np.diff(r.polyline, axis=0).T)
        assert steps.max() <= 0.5
        outside = np.abs(r.polyline).max(axis=1) > g.junction_half
        # on an arm one coordinate is within the carriageway half-width
        lateral = np.abs(r.polyline[outside]).min(axis=1)
        assert lateral.max() <= g.lane_width + 1e-9


def test_turn_arcs_have_tangent_headings(net):
    for r in net.routes.values():
        for s in (r.junction_start, r.junction_end):
            before = r.point(s - 1e-7)[2]
            after = r.point(s + 1e-7)[2]
            assert abs(math.remainder(after - before, 2 * math.pi)) < 1e-6


def test_projection_inverts_point(net):
    rng = np.random.default_rng(3)
    for r in net.routes.values():
        for s in rng.uniform(0, r.length, 20):
            x, y, _ = r.point(s)
            s_back, lat = r.project(x, y)
            assert s_back == pytest.approx(s, abs=1e-9)
            assert abs(lat) < 1e-9


def test_conflicts_are_symmetric(net):
    for a, b in net.conflicts:
        assert (b, a) in net.conflicts


# --- spawning -------------------------------------------------------------

def test_spawn_without_svs(net):
    w = spawn_scenario(0, np.random.default_rng(0), net)
    assert w.svs == [] and w.time == 0.0
    assert w.ego.route[0] == "S" and w.goal in legal_exits("S")


def test_spawn_is_deterministic(net):
    cfg = SpawnConfig(n_sv_max=6)
    a = spawn_scenario(6, np.random.default_rng(42), net, cfg)
    b = spawn_scenario(6, np.random.default_rng(42), net, cfg)
    assert a.ego == b.ego and a.svs == b.svs and a.goal == b.goal


def test_thousand_dense_spawns_have_no_overlap(net):
    cfg = SpawnConfig(n_sv_max=6)
    rng = np.random.default_rng(7)
    for _ in range(1000):
        w = spawn_scenario(6, rng, net, cfg)
        assert len(w.svs) == 6
        assert detect_collisions(w) == []
        assert all(sv.route[0] != "S" for sv in w.svs)


def test_spawn_errors_when_crowded(net):
    cfg = SpawnConfig(n_sv_max=6, min_gap=200.0, retries=5)
    with pytest.raises(SpawnError):
        spawn_scenario(2, np.random.default_rng(0), net, cfg)


def test_spawn_rejects_out_of_range_count(net):
    with pytest.raises(ValueError):
        spawn_scenario(3, np.random.default_rng(0), net, SpawnConfig(n_sv_max=2))


# --- IDM --------------------------------------------------------------------

def test_idm_free_road_equilibrium():
    assert idm_acceleration(CFG.v0, math.inf, 0.0, CFG) == pytest.approx(0.0, abs=1e-9)


def test_idm_standstill_at_minimum_gap():
    assert idm_acceleration(0.0, CFG.s0, 0.0, CFG) == pytest.approx(0.0, abs=1e-9)


def test_idm_matches_scalar_closed_form():
    cfg = SvBehaviorConfig(v0=9.0, s0=2.0, T=1.5, a=3.0, b=5.0, delta=4.0)
    # s* = 2 + 8*1.5 + 8*0/(2 sqrt 15) = 14
    expected = 3.0 * (1.0 - (8.0 / 9.0) ** 4 - (14.0 / 20.0) ** 2)
    assert idm_acceleration(8.0, 20.0, 8.0, cfg) == pytest.approx(expected, abs=1e-12)
    # closing in adds the dynamic term
    s_star = 2.0 + 8.0 * 1.5 + 8.0 * 3.0 / (2.0 * math.sqrt(15.0))
    expected = 3.0 * (1.0 - (8.0 / 9.0) ** 4 - (s_star / 30.0) ** 2)
    assert idm_acceleration(8.0, 30.0, 5.0, cfg) == pytest.approx(expected, abs=1e-12)


def test_idm_emergency_and_clamp():
    assert idm_acceleration(5.0, 0.0, 0.0, CFG) == -CFG.a_max
    assert idm_acceleration(5.0, -3.0, 0.0, CFG) == -CFG.a_max
    assert idm_acceleration(12.0, 0.1, 0.0, CFG) == -CFG.a_max


@given(st.floats(0, 20), st.floats(0.01, 500), st.floats(0, 20))
def test_idm_always_within_limits(v, gap, v_lead):
    a = idm_acceleration(v, gap, v_lead, CFG)
    assert -CFG.a_max <= a <= CFG.a_max


def test_lone_vehicle_converges_to_desired_speed():
    s = VehicleState(0.0, 0.0, 0.0, 0.0, ("W", "E"))
    for _ in range(300):
        s = apply_control(s, idm_acceleration(s.speed, math.inf, 0.0, CFG), 0.0, 0.1)
    assert abs(s.speed - CFG.v0) <= 0.02 * CFG.v0


@settings(max_examples=15, deadline=None)
@given(T=st.floats(1.0, 2.5), s0=st.floats(1.0, 4.0), a=st.floats(1.0, 4.0),
       b=st.floats(2.0, 7.0), seed=st.integers(0, 2 ** 16))
def test_idm_follower_never_hits_braking_leader(T, s0, a, b, seed):
    cfg = SvBehaviorConfig(v0=12.0, T=T, s0=s0, a=a, b=b)
    rng = np.random.default_rng(seed)
    lead = VehicleState(0.0, 0.0, 10.0, 0.0, ("W", "E"))
    s_star = s0 + 10.0 * T
    foll = VehicleState(-(s_star + 5.0), 0.0, 10.0, 0.0, ("W", "E"))
    lead_acc = 0.0
    for k in range(10_000):
        if k % 50 == 0:
            # leader decelerates or accelerates within the comfortable envelope
            lead_acc = rng.uniform(-b, a)
        gap = lead.x - foll.x - 5.0
        acc = idm_acceleration(foll.speed, gap, lead.speed, cfg)
        lead = apply_control(lead, lead_acc if lead.speed < 14 else min(lead_acc, 0.0), 0.0, 0.1)
        foll = apply_control(foll, acc, 0.0, 0.1)
        assert lead.x - foll.x > 5.0


# --- SV policy ------------------------------------------------------------

def test_lone_sv_cruising_straight(net):
    r = net.routes[("E", "W")]
    sv = place_on_route(net, ("E", "W"), r.junction_start + 5.0, CFG.v0)
    w = world_with(net, parked_ego(net), [sv])
    acc, steer = sv_policy_step(w, 0)
    assert acc == pytest.approx(0.0, abs=1e-9)
    assert steer == pytest.approx(0.0, abs=1e-9)


def test_sv_yields_to_vehicle_closer_to_shared_conflict(net):
    me_route, other_route = ("W", "E"), ("N", "S")
    assert (me_route, other_route) in net.conflicts
    r_me, r_o = net.routes[me_route], net.routes[other_route]
    me = place_on_route(net, me_route, r_me.junction_start - 12.0, 8.0)
    other = place_on_route(net, other_route, r_o.junction_start - 2.0, 8.0)
    alone, _ = sv_policy_step(world_with(net, parked_ego(net), [me]), 0)
    assert alone > 0
    acc, _ = sv_policy_step(world_with(net, parked_ego(net), [me, other]), 0)
    assert acc < 0
    # the vehicle with priority is not held up
    acc_o, _ = sv_policy_step(world_with(net, parked_ego(net), [me, other]), 1)
    assert acc_o >= 0


def test_sv_follows_leader_on_same_lane(net):
    r = net.routes[("E", "W")]
    lead = place_on_route(net, ("E", "W"), r.junction_start - 30.0, 0.0)
    me = place_on_route(net, ("E", "W"), r.junction_start - 40.0, 10.0)
    acc, _ = sv_policy_step(world_with(net, parked_ego(net), [me, lead]), 0)
    assert acc < -3.0


def test_sv_controls_within_limits_over_long_run(net):
    rng = np.random.default_rng(11)
    cfg = SpawnConfig(n_sv_max=6)
    steps = 0
    max_steer = max_acc = 0.0
    while steps < 10_000:
        w = spawn_scenario(6, rng, net, cfg)
        for _ in range(250):
            for i in range(len(w.svs)):
                acc, steer = sv_policy_step(w, i)
                max_steer = max(max_steer, abs(steer))
                max_acc = max(max_acc, abs(acc))
            w = env_step(w, (0.0, 0.0), 0.1)
            steps += 1
            for v in w.vehicles:
                assert v.speed >= 0.0 and math.isfinite(v.heading)
    assert max_steer <= math.radians(45.0) + 1e-12
    assert max_acc <= 8.0 + 1e-12


# --- kinematics -----------------------------------------------------------

def test_straight_step():
    s = apply_control(VehicleState(1.0, 2.0, 5.0, 0.0, ("W", "E")), 0.0, 0.0, 0.1)
    assert s.x == pytest.approx(1.5, abs=1e-12)
    assert s.y == 2.0 and s.speed == 5.0


def test_speed_floor():
    s = apply_control(VehicleState(0.0, 0.0, 0.0, 0.0, ("W", "E")), -3.0, 0.0, 0.1)
    assert s.speed == 0.0 and s.x == 0.0
    s = apply_control(VehicleState(0.0, 0.0, 0.2, 0.0, ("W", "E")), -8.0, 0.0, 0.1)
    # stops after 0.025 s, having covered v^2/(2a)
    assert s.speed == 0.0
    assert s.x == pytest.approx(0.2 ** 2 / 16.0, abs=1e-12)


def test_inputs_are_clamped():
    s = apply_control(VehicleState(0.0, 0.0, 5.0, 0.0, ("W", "E")), 50.0, 3.0, 0.1)
    assert s.speed == pytest.approx(5.8)
    ref = apply_control(VehicleState(0.0, 0.0, 5.0, 0.0, ("W", "E")), 8.0, math.radians(45), 0.1)
    assert (s.x, s.y, s.heading) == (ref.x, ref.y, ref.heading)


def test_apply_control_rejects_bad_dt():
    with pytest.raises(ValueError):
        apply_control(VehicleState(0.0, 0.0, 5.0, 0.0, ("W", "E")), 0.0, 0.0, 0.0)


@pytest.mark.parametrize("steer", [0.1, 0.3, -0.5])
def test_turning_radius(steer):
    s = VehicleState(0.0, 0.0, 6.0, 0.3, ("W", "E"))
    pts = []
    for _ in range(400):
        s = apply_control(s, 0.0, steer, 0.05)
        pts.append((s.x, s.y))
    p = np.array(pts)
    # algebraic circle fit: x^2 + y^2 + D x + E y + F = 0
    A = np.column_stack([p[:, 0], p[:, 1], np.ones(len(p))])
    D, E, F = np.linalg.lstsq(A, -(p ** 2).sum(axis=1), rcond=None)[0]
    radius = math.sqrt(D * D / 4 + E * E / 4 - F)
    expected = s.wheelbase / math.tan(abs(steer))
    assert radius == pytest.approx(expected, rel=0.01)


@given(st.floats(0, 15), st.floats(-20, 20), st.floats(-2, 2), st.floats(0.01, 0.5))
def test_speed_never_negative(v, acc, steer, dt):
    s = apply_control(VehicleState(0.0, 0.0, v, 0.0, ("W", "E")), acc, steer, dt)
    assert s.speed >= 0.0 and math.isfinite(s.heading)


# --- collisions -----------------------------------------------------------

def test_coincident_rectangles_collide():
    r = (3.0, -1.0, 0.7, 5.0, 2.0)
    assert rectangles_overlap(r, r)


def test_distant_rectangles_do_not_collide():
    assert not rectangles_overlap((0.0, 0.0, 0.0, 5.0, 2.0), (100.0, 0.0, 1.0, 5.0, 2.0))


def test_sat_agrees_with_sampling_oracle():
    hits = 0
    for a, b, oracle in random_rectangle_pairs(np.random.default_rng(2024), 1000):
        hits += oracle
        assert rectangles_overlap(a, b) == oracle, (a, b)
        assert rectangles_overlap(b, a) == oracle
    assert 100 < hits < 900  # both verdicts exercised


def test_detect_collisions_indexes_ego_first(net):
    ego = place_on_route(net, ("S", "N"), 30.0, 5.0)
    sv_far = place_on_route(net, ("E", "W"), 10.0, 5.0)
    sv_hit = replace(ego, route=("E", "W"), heading=ego.heading + 0.3)
    w = world_with(net, ego, [sv_far, sv_hit])
    assert detect_collisions(w) == [(0, 2)]
    assert detect_collisions(w, ego_only=True) == [(0, 2)]


# --- off-road -------------------------------------------------------------

def test_on_centerline_is_on_road(net):
    assert not off_road(world_with(net, place_on_route(net, ("S", "N"), 30.0, 5.0)))


def test_lateral_excursion_is_off_road(net):
    ego = place_on_route(net, ("S", "N"), 30.0, 5.0)
    assert off_road(world_with(net, replace(ego, x=ego.x + 20.0)))


def test_every_route_point_is_on_road(net):
    for rid, r in net.routes.items():
        for x, y in r.polyline[::2]:
            ego = VehicleState(float(x), float(y), 5.0, 0.0, rid)
            assert not off_road(world_with(net, ego)), (rid, x, y)


def test_off_road_tolerance(net):
    g = net.config
    # south arm edge at x = lane_width
    ego = VehicleState(g.lane_width + 0.05, -40.0, 5.0, math.pi / 2, ("S", "N"))
    assert not off_road(world_with(net, ego))
    ego = replace(ego, x=g.lane_width + 0.15)
    assert off_road(world_with(net, ego))


# --- stepping ---------------------------------------------------------------

def test_env_step_is_deterministic(net):
    w1 = spawn_scenario(3, np.random.default_rng(5), net, SpawnConfig(n_sv_max=3))
    w2 = spawn_scenario(3, np.random.default_rng(5), net, SpawnConfig(n_sv_max=3))
    for k in range(100):
        ctrl = (math.sin(k), 0.1 * math.cos(k))
        w1, w2 = env_step(w1, ctrl, 0.1), env_step(w2, ctrl, 0.1)
    assert w1.ego == w2.ego and w1.svs == w2.svs and w1.time == w2.time


def test_env_step_without_svs_moves_only_ego(net):
    w = spawn_scenario(0, np.random.default_rng(1), net)
    w2 = env_step(w, (1.0, 0.0), 0.1)
    assert w2.svs == [] and w2.ego != w.ego
    assert w2.time == pytest.approx(0.1)
    assert w.time == 0.0  # input untouched


def test_env_step_rejects_bad_dt(net):
    with pytest.raises(ValueError):
        env_step(spawn_scenario(0, np.random.default_rng(1), net), (0.0, 0.0), -0.1)


def test_progress_is_monotone(net):
    w = spawn_scenario(2, np.random.default_rng(9), net, SpawnConfig(n_sv_max=2))
    prev = [v.progress for v in w.vehicles]
    for k in range(300):
        w = env_step(w, (-2.0 if k % 20 < 10 else 2.0, 0.0), 0.1)
        cur = [v.progress for v in w.vehicles]
        assert all(c >= p for c, p in zip(cur, prev))
        prev = cur


def test_platoon_of_four_never_collides(net):
    route = ("E", "W")
    start = net.routes[route].junction_start - 10.0
    cfg = net.config
    # spacing comfortably above s* at the common initial speed
    v = 8.0
    spacing = CFG.s0 + v * CFG.T + cfg.vehicle_length + 1.0
    svs = [place_on_route(net, route, start - k * spacing, v) for k in range(4)]
    w = world_with(net, parked_ego(net), svs)
    min_gap = math.inf
    for _ in range(10_000):
        w = env_step(w, (0.0, 0.0), 0.1)
        assert detect_collisions(w) == []
        for a, b in zip(w.svs, w.svs[1:]):
            min_gap = min(min_gap, a.progress - b.progress - cfg.vehicle_length)
    assert min_gap > 0
    assert w.svs[0].speed == pytest.approx(CFG.v0_approach, rel=0.02)


def test_trajectory_csv(net, tmp_path):
    w = spawn_scenario(2, np.random.default_rng(0), net, SpawnConfig(n_sv_max=2))
    worlds = [w, env_step(w, (0.0, 0.0), 0.1)]
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, worlds)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,vehicle_id,x,y,speed,heading"
    assert len(lines) == 1 + 2 * 3
