import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given
from hypothesis import strategies as st

from cobotsafe.robot import JointLimitError, RobotModel, forward_keypoints
from cobotsafe.trajectory import (JointTrajectory, TimingBudget, apply_stop, check_trajectory, plan_pick_and_place,
                                  plan_reduce_speed, plan_resume, plan_stop, start_cycle, stop_time_per_joint)

from conftest import constant_velocity

BUDGET = TimingBudget()


def _ee_speed(model, traj):
    ee = forward_keypoints(model, traj.q, check=False)[:, 0]
    return np.linalg.norm(np.diff(ee, axis=0), axis=1) / traj.dt


def test_timing_budget_validation():
    with pytest.raises(ValueError):
        TimingBudget(t_calc=0.0)
    with pytest.raises(ValueError):
        TimingBudget(t_calc=0.2, t_r=0.1)


def test_stop_time_examples():
    assert stop_time_per_joint(0.0, -1.5, 1.5) == 0.0
    assert stop_time_per_joint(1.1, -1.5, 1.5) == pytest.approx(0.73333, abs=1e-4)
    assert stop_time_per_joint(-0.6, -2.0, 2.0) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        stop_time_per_joint(1.0, 0.0, 1.0)


@given(st.floats(-3, 3), st.floats(0.1, 5), st.floats(0.1, 5))
def test_stop_time_nonnegative(qd, dec, acc):
    assert stop_time_per_joint(qd, -dec, acc) >= 0


def test_stop_from_rest_holds(model):
    traj = constant_velocity(model, 0.0)
    plan = plan_stop(traj, 0.3, BUDGET)
    assert plan.t_e == 0.0
    q, qd, _ = plan.evaluate([0.0, 0.1])
    assert np.allclose(q, traj.q[0]) and np.allclose(qd, 0.0)


def test_stop_single_joint_fig4(model):
    qd = np.zeros(7)
    qd[0] = 1.1
    traj = constant_velocity(model, qd)
    plan = plan_stop(traj, 0.5, BUDGET)
    assert plan.t_e == pytest.approx(0.3836, abs=BUDGET.dt)
    assert plan.t_e == pytest.approx(1.1 / 2.868, rel=1e-12)


def test_stop_with_configured_decel_1_5(model):
    slow = replace(model, accel_min=np.full(7, -1.5), accel_max=np.full(7, 1.5))
    qd = np.zeros(7)
    qd[0] = 1.1
    plan = plan_stop(constant_velocity(slow, qd), 0.5, BUDGET)
    assert plan.t_e == pytest.approx(0.7333, abs=1e-4)


def test_stop_two_joints_relative_scaling():
    model = replace(RobotModel.default(), accel_min=np.full(7, -1.0), accel_max=np.full(7, 1.0))
    qd = np.zeros(7)
    qd[:2] = [1.0, 0.5]
    traj = constant_velocity(model, qd, duration=3.0)
    plan = plan_stop(traj, 0.5, BUDGET)
    assert plan.t_e == pytest.approx(1.0)
    taus = np.linspace(0, plan.t_e, 201)
    q, v, a = plan.evaluate(taus)
    assert np.allclose(a[:-1, :2], [-1.0, -0.5])
    assert np.allclose(v[-1], 0.0, atol=1e-12)
    # numerical integration of the velocity reproduces the positions
    integ = plan.q_ref + np.concatenate([[np.zeros(7)], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(taus)[:, None],
                                                                  axis=0)])
    assert np.allclose(q, integ, atol=1e-9)


def test_stop_plan_beyond_end_is_empty(model):
    traj = constant_velocity(model, 0.2, duration=0.5)
    plan = plan_stop(traj, 10.0, BUDGET)
    assert plan.empty
    assert apply_stop(traj, 10.0, BUDGET) is traj


@pytest.fixture(scope="module")
def nominal():
    model = RobotModel.default()
    wps = [[-0.8, 1.3, 0, 1.3, 0, 0.6, 0], [0.8, -0.2, 0, -0.2, 0, 0.6, 0], [-0.8, 1.3, 0, 1.3, 0, 0.6, 0]]
    return model, plan_pick_and_place(model, wps, 1.1, accel_limits=2.0, ee_speed=1.0, dwell=[0, 1.85, 1.85])


@given(st.floats(0.0, 5.5))
def test_stop_plan_properties(nominal, t_now):
    model, traj = nominal
    plan = plan_stop(traj, t_now, BUDGET)
    assert plan.t_ref >= t_now + BUDGET.t_calc - 1e-9
    assert plan.t_ref - BUDGET.dt < t_now + BUDGET.t_calc
    q, qd, qdd = plan.evaluate([0.0])
    assert np.allclose(q[0], traj.q[plan.index], atol=1e-9)
    assert np.allclose(qd[0], traj.qd[plan.index], atol=1e-9)
    if plan.empty:
        return
    taus = np.linspace(0, plan.t_e, 50)
    _, v, a = plan.evaluate(taus)
    assert np.allclose(v, np.outer(1 - taus / plan.t_e, plan.qd_ref), atol=1e-9)
    assert np.allclose(v[-1], 0.0, atol=1e-12)
    # binding joint brakes at exactly its limit, others never exceed theirs
    j = int(np.argmax(stop_time_per_joint(plan.qd_ref, traj.accel_min, traj.accel_max)))
    limit = traj.accel_min[j] if plan.qd_ref[j] >= 0 else traj.accel_max[j]
    assert a[0, j] == pytest.approx(limit, rel=1e-12)
    assert np.all(a[0] >= traj.accel_min - 1e-12) and np.all(a[0] <= traj.accel_max + 1e-12)
    # no overshoot: each joint moves monotonically toward its stop position
    assert np.all(v * np.sign(plan.qd_ref) >= -1e-12)


@given(st.floats(0.0, 6.0))
def test_stop_stays_on_path(nominal, t_now):
    model, traj = nominal
    stopped = apply_stop(traj, t_now, BUDGET)
    # oracle: distance from each sample to the nearest straight waypoint segment
    wps = np.array([[-0.8, 1.3, 0, 1.3, 0, 0.6, 0], [0.8, -0.2, 0, -0.2, 0, 0.6, 0]])
    d = wps[1] - wps[0]
    u = np.clip((stopped.q - wps[0]) @ d / (d @ d), 0.0, 1.0)
    off = np.linalg.norm(stopped.q - (wps[0] + np.outer(u, d)), axis=1)
    assert off.max() < 1e-6
    assert not check_trajectory(stopped)


@given(st.floats(0.0, 6.0))
def test_latency_contract(nominal, t_now):
    _, traj = nominal
    stopped = apply_stop(traj, t_now, BUDGET)
    keep = traj.t < t_now + BUDGET.t_calc - 1e-9
    n = int(keep.sum())
    assert np.array_equal(stopped.q[:n], traj.q[:n])
    assert np.array_equal(stopped.qd[:n], traj.qd[:n])


def test_pick_and_place_trapezoid_duration():
    model = RobotModel.default()
    wps = [np.zeros(7), np.array([1.0, 0, 0, 0, 0, 0, 0])]
    traj = plan_pick_and_place(model, wps, 1.0, accel_limits=1.0, ee_speed=None, dt=0.005)
    assert traj.t_end == pytest.approx(2.0, abs=1e-9)
    assert traj.max_abs_velocity()[0] == pytest.approx(1.0, abs=1e-3)
    assert np.allclose(traj.q[-1], wps[-1])


def test_pick_and_place_single_waypoint_is_empty(model):
    traj = plan_pick_and_place(model, [np.full(7, 0.1)])
    assert len(traj) == 1 and traj.finished


def test_pick_and_place_unreachable(model):
    with pytest.raises(JointLimitError):
        plan_pick_and_place(model, [np.zeros(7), np.array([0, 3.0, 0, 0, 0, 0, 0])])


def test_pick_and_place_limits_and_ee_speed(nominal):
    model, traj = nominal
    assert not check_trajectory(traj)
    peak = _ee_speed(model, traj).max()
    assert peak == pytest.approx(1.0, rel=0.02)
    assert traj.finished
    assert np.allclose(traj.q[-1], traj.q[0])


def test_cycle_repeats_periodically(nominal):
    _, traj = nominal
    again = start_cycle(traj, traj.t_end, 1.0)
    assert np.allclose(again.t - traj.t_end, traj.t)
    assert np.array_equal(again.q, traj.q)


def test_reduce_constant_velocity(model):
    qd = np.zeros(7)
    qd[0] = 1.0
    traj = constant_velocity(model, qd, duration=4.0)
    slow = plan_reduce_speed(traj, 0.5, 0.42, BUDGET)
    tail = slow.qd[slow.t > 1.2]
    # the source ends mid-motion, so only the part before its end is checked
    assert np.allclose(tail[:-1, 0], 0.42, atol=1e-6)
    assert np.all(np.abs(np.diff(slow.qd[:-1, 0])) <= 2.868 * slow.dt + 1e-9)
    with pytest.raises(ValueError):
        plan_reduce_speed(traj, 0.5, 1.0, BUDGET)


def test_reduce_twice_is_identity(nominal):
    _, traj = nominal
    once = plan_reduce_speed(traj, 0.8, 0.42, BUDGET)
    twice = plan_reduce_speed(once, 2.0, 0.42, BUDGET)
    assert len(twice) == len(once)
    assert np.allclose(twice.q, once.q, atol=1e-9)


def test_resume_at_full_speed_is_identity(nominal):
    _, traj = nominal
    same = plan_resume(traj, 1.0, BUDGET)
    assert len(same) == len(traj)
    assert np.allclose(same.q, traj.q, atol=1e-9)


def test_reduce_bounds_ee_speed(nominal):
    model, traj = nominal
    t_now = 0.8
    slow = plan_reduce_speed(traj, t_now, 0.42, BUDGET)
    assert not check_trajectory(slow)
    after = slow.t[1:] > t_now + 0.5
    assert _ee_speed(model, slow)[after].max() <= 0.42 + 1e-3


def test_stitch_continuity(nominal):
    _, traj = nominal
    slow = plan_reduce_speed(traj, 0.8, 0.42, BUDGET)
    jumps = np.abs(np.diff(slow.qd, axis=0))
    assert np.all(jumps <= np.maximum(-slow.accel_min, slow.accel_max) * slow.dt + 1e-9)


def test_resume_ramp_duration(model):
    qd = np.zeros(7)
    qd[0] = 1.0
    traj = constant_velocity(model, qd, duration=4.0)
    stopped = apply_stop(traj, 0.5, BUDGET).hold_until(1.5)
    resumed = plan_resume(stopped, 1.0, BUDGET)
    moving = np.flatnonzero(resumed.qd[:, 0] > 1e-12)
    start = resumed.t[moving[moving > stopped.index_at(1.0)][0]] - resumed.dt
    full = resumed.t[np.flatnonzero(np.abs(resumed.qd[:, 0] - 1.0) < 1e-9)]
    full = full[full > start][0]
    assert full - start == pytest.approx(1.0 / 2.868, abs=resumed.dt)


def test_reduce_then_resume_reaches_goal(nominal):
    _, traj = nominal
    slow = plan_reduce_speed(traj, 0.6, 0.42, BUDGET)
    back = plan_resume(slow, 2.5, BUDGET)
    assert back.finished
    assert np.allclose(back.q[-1], traj.q[-1], atol=1e-6)
    assert not check_trajectory(back)
    assert back.t_end > traj.t_end


def test_csv_round_trip(tmp_path, nominal):
    model, traj = nominal
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    back = JointTrajectory.from_csv(path, model)
    assert np.allclose(back.t, traj.t, atol=1e-6)
    assert np.allclose(back.q, traj.q, atol=1e-9)
    assert np.allclose(back.qd, traj.qd, atol=1e-9)
