"""Evaluation tests: scoring arithmetic, the bicycle simulator, infraction
detection, the expert policy, and closed-loop runs."""

import json
import math

import numpy as np
import pytest

from sdcdrive.control import ControlCommand
from sdcdrive.evaluation import (
    ExpertAgent,
    InfractionEvent,
    RouteResult,
    SimParams,
    SimState,
    driving_score,
    infraction_penalty,
    route_completion,
    run_closed_loop,
    simulate_step,
    task_metrics,
)
from sdcdrive.evaluation.simulator import detect_infractions
from sdcdrive.geometry import VehiclePose
from sdcdrive.world import CLS_VEHICLE, Npc, Scene


class TestInfractionPenalty:
    def test_clean_route(self):
        assert infraction_penalty([]) == 1.0

    def test_single_red_light(self):
        assert infraction_penalty(["red_light"]) == 0.7

    def test_product_of_two(self):
        events = [InfractionEvent("red_light", (0, 0), 1.0),
                  InfractionEvent("collision_vehicle", (0, 0), 2.0)]
        assert infraction_penalty(events) == pytest.approx(0.42, abs=1e-12)

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError):
            infraction_penalty(["jaywalking"])

    def test_bad_penalty_value_rejected(self):
        with pytest.raises(ValueError):
            infraction_penalty(["red_light"], {"red_light": 1.5})


class TestRouteCompletion:
    ROUTE = [(0.0, 0.0), (100.0, 0.0)]

    def test_exact_route(self):
        path = [(x, 0.0) for x in np.linspace(0, 100, 51)]
        assert route_completion(path, self.ROUTE) == 1.0

    def test_half_route(self):
        path = [(x, 0.0) for x in np.linspace(0, 50, 26)]
        assert route_completion(path, self.ROUTE) == pytest.approx(0.5)

    def test_off_corridor_counts_nothing(self):
        path = [(x, 5.0) for x in np.linspace(0, 100, 51)]
        assert route_completion(path, self.ROUTE) == 0.0

    def test_empty_path_rejected(self):
        with pytest.raises(ValueError):
            route_completion([], self.ROUTE)


class TestDrivingScore:
    def test_single_perfect_route(self):
        assert driving_score([RouteResult(1.0, 1.0)]) == 1.0

    def test_composite_case(self):
        results = [RouteResult(0.8, 1.0), RouteResult(0.6, 0.5)]
        assert driving_score(results) == pytest.approx(0.55, abs=1e-12)

    def test_percent_scale_self_consistency(self):
        assert RouteResult(99.919, 1.00).ds == pytest.approx(99.919, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            driving_score([])


def test_task_metrics_hand_cases():
    preds = [{"traffic_light": 0.9, "speed": 4.0, "seg": [0.5], "waypoints": [[0.0, 0.0]],
              "steering": 0.2, "throttle": 0.5, "brake": 0.0}]
    gts = [{"traffic_light": 1.0, "speed": 3.0, "seg": [1.0], "waypoints": [[0.0, 0.0]],
            "steering": 0.5, "throttle": 0.5, "brake": 1.0}]
    m = task_metrics(preds, gts)
    assert m["acc_tl"] == 1.0
    assert m["mae_sp"] == pytest.approx(1.0)
    assert m["bce_seg"] == pytest.approx(math.log(2.0))
    assert m["mae_wp"] == 0.0
    assert m["mae_st"] == pytest.approx(0.3)
    assert m["mae_br"] == 1.0


class TestSimulator:
    def test_straight_constant_speed(self):
        p = SimParams()
        # throttle balancing drag holds speed constant
        v = 4.0
        cmd = ControlCommand(0.0, p.drag * v / p.accel_gain, 0)
        state = SimState(VehiclePose(0.0, 0.0, 0.0), speed=v)
        for _ in range(100):
            state = simulate_step(state, cmd, 0.05, p)
        assert state.speed == pytest.approx(v, abs=1e-9)
        assert state.pose.x == pytest.approx(v * 100 * 0.05, rel=1e-9)
        assert state.pose.y == pytest.approx(0.0, abs=1e-9)

    def test_circle_radius_matches_bicycle_model(self):
        p = SimParams()
        v, steering = 4.0, 0.5
        expected_r = p.wheelbase / math.tan(steering * p.max_steer_rad)
        cmd = ControlCommand(-steering, p.drag * v / p.accel_gain, 0)
        state = SimState(VehiclePose(0.0, 0.0, 0.0), speed=v)
        xs, ys = [], []
        period = 2 * math.pi * expected_r / v
        steps = int(period / 0.01) + 1
        for _ in range(steps):
            state = simulate_step(state, cmd, 0.01, p)
            xs.append(state.pose.x)
            ys.append(state.pose.y)
        r = (max(xs) - min(xs) + max(ys) - min(ys)) / 4.0
        assert r == pytest.approx(expected_r, rel=0.01)

    def test_brake_stops_without_reversing(self):
        state = SimState(VehiclePose(0, 0, 0), speed=1.0)
        cmd = ControlCommand(0.0, 0.0, 1)
        for _ in range(10):
            state = simulate_step(state, cmd, 0.1)
        assert state.speed == 0.0

    def test_dt_bounds(self):
        state = SimState(VehiclePose(0, 0, 0), speed=0.0)
        with pytest.raises(ValueError):
            simulate_step(state, ControlCommand(0, 0, 0), 0.0)
        with pytest.raises(ValueError):
            simulate_step(state, ControlCommand(0, 0, 0), 1.0)

    def test_input_state_untouched(self):
        state = SimState(VehiclePose(1.0, 2.0, 3.0), speed=1.5)
        simulate_step(state, ControlCommand(0.1, 0.2, 0), 0.05)
        assert (state.pose.x, state.pose.y, state.speed) == (1.0, 2.0, 1.5)


class TestInfractionDetection:
    def test_vehicle_collision_fires_once(self):
        scene = Scene(route=np.array([[0.0, 0.0], [50.0, 0.0]]))
        scene.npcs.append(Npc(5.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.6, CLS_VEHICLE))
        state = SimState(VehiclePose(4.5, 0.0, 0.0), speed=2.0)
        events, _ = detect_infractions(scene, state, 0.0)
        assert [e[0] for e in events] == ["collision_vehicle"]
        events, _ = detect_infractions(scene, state, 0.0)
        assert events == []

    def test_red_light_crossing(self):
        from sdcdrive.world import TrafficLight

        scene = Scene(route=np.array([[0.0, 0.0], [50.0, 0.0]]))
        scene.lights.append(TrafficLight(20.0, 4.0, stop_s=20.0, state="red"))
        state = SimState(VehiclePose(21.0, 0.0, 0.0), speed=3.0)
        events, _ = detect_infractions(scene, state, prev_s=19.0)
        assert [e[0] for e in events] == ["red_light"]

    def test_stop_sign_satisfied_when_stopped(self):
        from sdcdrive.world import StopSign

        scene = Scene(route=np.array([[0.0, 0.0], [50.0, 0.0]]))
        scene.stop_signs.append(StopSign(20.0, 4.0, stop_s=20.0))
        stopped = SimState(VehiclePose(15.0, 0.0, 0.0), speed=0.0)
        detect_infractions(scene, stopped, prev_s=14.0)
        moving = SimState(VehiclePose(21.0, 0.0, 0.0), speed=3.0)
        events, _ = detect_infractions(scene, moving, prev_s=19.0)
        assert events == []


def _straight_scene(length=40.0):
    return Scene(route=np.array([[0.0, 0.0], [length, 0.0]]))


class _BrakeAgent:
    def __init__(self):
        self.privileged = True

    def reset(self):
        pass

    def step_privileged(self, scene, state, dt):
        return ControlCommand(0.0, 0.0, 1), None


class _BlindAgent:
    """Drives straight at constant throttle, ignoring everything."""

    privileged = True

    def reset(self):
        pass

    def step_privileged(self, scene, state, dt):
        return ControlCommand(0.0, 0.5, 0), None


@pytest.mark.slow
class TestClosedLoop:
    def test_expert_finishes_clean(self):
        result, trace = run_closed_loop(ExpertAgent(), _straight_scene())
        assert result.termination == "finished"
        assert result.rc == 1.0 and result.ip == 1.0 and result.ds == 1.0

    def test_braking_agent_blocked(self):
        result, _ = run_closed_loop(_BrakeAgent(), _straight_scene(),
                                    max_time=200.0)
        assert result.termination == "blocked"
        assert result.ip == 1.0

    def test_blind_agent_hits_lead_vehicle(self):
        from sdcdrive.world import CLS_VEHICLE, Npc

        scene = _straight_scene()
        scene.npcs.append(Npc(20.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.6, CLS_VEHICLE))
        result, _ = run_closed_loop(_BlindAgent(), scene)
        assert any(e.type == "collision_vehicle" for e in result.infractions)
        assert result.ip == pytest.approx(0.6)

    def test_adversarial_crossing_triggers(self):
        from sdcdrive.world import CrossingTrigger

        scene = _straight_scene()
        scene.triggers.append(CrossingTrigger(s=25.0))
        run_closed_loop(_BlindAgent(), scene, mode="adversarial")
        assert scene.triggers[0].fired is False  # input scene untouched

    def test_trace_determinism(self):
        scene = _straight_scene()
        _, a = run_closed_loop(ExpertAgent(), scene)
        _, b = run_closed_loop(ExpertAgent(), scene)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            run_closed_loop(ExpertAgent(), _straight_scene(), mode="chaotic")

    def test_failing_agent_scored_not_raised(self):
        class Boom:
            privileged = True

            def reset(self):
                pass

            def step_privileged(self, scene, state, dt):
                raise RuntimeError("broken sensor")

        result, _ = run_closed_loop(Boom(), _straight_scene())
        assert result.termination.startswith("agent_error")
        assert result.rc == 0.0
