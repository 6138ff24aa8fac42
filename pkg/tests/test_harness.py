from dataclasses import replace

import numpy as np
import pytest

from cobotsafe.config import ConfigError, build_setup, load_config
from cobotsafe.geometry import BaseDistances, CompensationTable, build_separation_matrix
from cobotsafe.harness import (InvariantViolation, ScenarioSpec, compare_scenarios, ordering_checks,
                               run_scenario)
from cobotsafe.monitor import DistanceSource, Regime, ScenarioPolicy, StopRule, scenario_policy
from cobotsafe.operator_sim import OperatorScript, PursuitOperator
from cobotsafe.robot import forward_keypoints
from cobotsafe.trajectory import Dwell, MotionSegment


def _empty(setup, name, cycles=2):
    return replace(setup.spec(name, cycles=cycles), operator=None)


def test_empty_workspace_full_speed(setup):
    result, trace = run_scenario(_empty(setup, "full", cycles=20))
    assert result.completed and not result.violations
    assert result.transitions == {}
    assert result.total_duration == pytest.approx(20 * 7.72, abs=20 * setup.budget.dt)
    assert len(result.cycle_durations) == 20


@pytest.mark.parametrize("name", ["1", "2", "3", "4", "5"])
def test_empty_workspace_matches_full(setup, name):
    full, _ = run_scenario(_empty(setup, "full", cycles=1))
    result, _ = run_scenario(_empty(setup, name, cycles=1))
    assert result.total_duration == full.total_duration
    assert result.n_transitions == 0


def test_reduced_baseline_is_motion_time_scaled(setup):
    result, _ = run_scenario(_empty(setup, "reduced", cycles=2))
    segs = setup.nominal.path.segments
    motion = sum(s.duration for s in segs if isinstance(s, MotionSegment))
    dwell = sum(s.duration for s in segs if isinstance(s, Dwell))
    # time-scaling oracle: only the motion stretches by 1 / 0.42, dwell is fixed
    expected = motion / 0.42 + dwell
    dt = setup.budget.dt
    for d in result.cycle_durations:
        assert d == pytest.approx(expected, abs=2 * dt)
    full = motion + dwell
    assert 1.0 < expected / full < 1 / 0.42


def test_benchmark_result_totals_and_trace(setup):
    result, trace = run_scenario(setup.spec("4", cycles=2))
    assert result.completed and not result.violations
    assert result.total_duration == pytest.approx(sum(result.cycle_durations), abs=1e-9)
    assert np.all(np.diff(trace.t) > 0)
    assert np.allclose(np.diff(trace.t), setup.budget.dt)
    assert (len(trace) - 1) * setup.budget.dt == pytest.approx(result.total_duration, abs=setup.budget.dt)
    # conservation of task: back at home
    assert np.allclose(trace.q[-1], setup.nominal.q[0], atol=1e-6)
    assert np.allclose(trace.qd[-1], 0.0)
    assert result.n_transitions > 0
    rec = trace[0]
    assert rec.t == 0.0 and rec.regime is Regime.FULL


def test_trace_csv_header(setup):
    _, trace = run_scenario(setup.spec("5", cycles=1))
    lines = trace.to_csv().splitlines()
    header = "t,regime,speed_scale,min_pair_dist,human_kp,robot_kp,ee_speed," + ",".join(
        [f"q{j}" for j in range(1, 8)] + [f"qd{j}" for j in range(1, 8)])
    assert lines[0] == header
    assert len(lines) == len(trace) + 1
    assert lines[1].split(",")[1] == "FULL"


def test_reduced_trace_respects_speed(setup):
    _, trace = run_scenario(_empty(setup, "reduced", cycles=1))
    assert trace.ee_speed.max() <= 0.42 + 1e-3
    _, trace = run_scenario(_empty(setup, "full", cycles=1))
    assert trace.ee_speed.max() == pytest.approx(1.0, rel=0.02)


def test_identical_specs_are_deterministic(setup):
    spec = setup.spec("3", cycles=2)
    a, ta = run_scenario(spec)
    b, tb = run_scenario(spec)
    assert a.total_duration == b.total_duration
    assert ta.to_csv() == tb.to_csv()


def test_compare_rejects_mismatch(setup):
    with pytest.raises(ValueError):
        compare_scenarios([setup.spec("4", cycles=2), setup.spec("5", cycles=3)])
    with pytest.raises(ValueError):
        compare_scenarios([setup.spec("4", cycles=2), setup.spec("5", cycles=2, seed=99)])


def test_compare_small(setup):
    comparison, results = compare_scenarios([setup.spec(n, cycles=2) for n in ("full", "4", "5", "reduced")])
    d = comparison.durations
    assert list(d) == sorted(d, key=d.get)
    assert comparison.checks.keys() == {"full < sc5", "sc5 <= sc4", "sc5 < reduced"}
    assert comparison.to_csv().splitlines()[0] == "scenario,duration_s,transitions,violations"


def test_ordering_checks():
    good = {"full": 154, "5": 228, "4": 231, "1": 267, "3": 257, "reduced": 256}
    assert all(ordering_checks(good).values())
    assert not ordering_checks({**good, "5": 240})["sc5 <= sc4"]


def test_spec_validation(setup):
    with pytest.raises(ValueError):
        ScenarioSpec("7", setup.robot, setup.nominal)
    with pytest.raises(ValueError):
        ScenarioSpec("4", setup.robot, setup.nominal)
    with pytest.raises(ValueError):
        ScenarioSpec("full", setup.robot, setup.nominal, cycles=0)
    with pytest.raises(ValueError):
        ScenarioSpec("full", setup.robot, setup.nominal, tick=0.01)


def test_missing_threshold_rejected():
    matrix = build_separation_matrix(BaseDistances(), CompensationTable.default(), robots=("EE",))
    with pytest.raises(ValueError):
        ScenarioPolicy(4, DistanceSource.MOVING_KEYPOINTS, ("EE", "J5"), StopRule.ANY_KEYPOINT, matrix)
    cfg = load_config()
    del cfg["compensation"]["robot"]["J5"]
    with pytest.raises(ConfigError):
        build_setup(cfg)


def test_baseline_ignores_operator(setup):
    walk_in = OperatorScript(((0.0, (1.0, 0.0, 0.7)), (100.0, (1.0, 0.0, 0.7))))
    spec = replace(setup.spec("full", cycles=1), operator=walk_in)
    result, trace = run_scenario(spec)
    assert result.n_transitions == 0 and not result.violations
    assert np.isfinite(trace.min_pair_dist).all()


def test_unmonitored_contact_is_reported(setup):
    # the monitor ignores the body spheres and stops only at 1 mm, so an operator
    # standing next to the EE path is touched and the harness must report it
    tiny = BaseDistances(1e-3, 1e-3, 1e-3)
    policy = scenario_policy(3, tiny, CompensationTable.zero())
    mid = setup.nominal.q[len(setup.nominal) // 4]
    ee = forward_keypoints(setup.robot, mid)[0]
    neck = (ee[0], ee[1], ee[2] - 0.2)
    op = OperatorScript(((0.0, neck), (20.0, neck)))
    spec = replace(setup.spec("3", cycles=1), operator=op, policy=policy)
    result, _ = run_scenario(spec)
    assert any("contact" in v for v in result.violations)
    with pytest.raises(InvariantViolation):
        run_scenario(spec, strict=True)


def test_pursuit_sprint_never_touches_moving_robot(setup):
    op = PursuitOperator((2.0, -1.0, 0.7), "EE", t_start=0.3)
    spec = replace(setup.spec("4", cycles=1, operator=op), max_time=4.0)
    result, trace = run_scenario(spec)
    assert not result.violations
    assert Regime.STOPPED in set(trace.regime.tolist())
