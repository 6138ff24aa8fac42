import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cobotsafe.robot import ROBOT_KEYPOINTS, JointLimitError, JointState, RobotModel, ee_cartesian_speed, \
    forward_keypoints


def _configs(model):
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    return st.lists(st.floats(0.0, 1.0), min_size=7, max_size=7).map(lambda u: lo + np.array(u) * (hi - lo))


def test_zero_configuration_is_vertical(model):
    kps = forward_keypoints(model, np.zeros(7))
    assert kps.shape == (9, 3)
    assert np.allclose(kps[:, :2], 0.0)
    assert np.isclose(np.linalg.norm(kps[0] - kps[-1]), np.linalg.norm(model.link_offsets, axis=1).sum())
    assert np.isclose(kps[0, 2], 0.8)


def test_base_is_origin_and_labels(model):
    kps = forward_keypoints(model, np.full(7, 0.3))
    assert np.array_equal(kps[-1], np.zeros(3))
    assert model.keypoint_labels == ROBOT_KEYPOINTS
    assert ROBOT_KEYPOINTS[0] == "EE" and ROBOT_KEYPOINTS[-1] == "Base"


def test_joint1_half_turn_rotates_about_base_axis():
    # a bent chain so the rotation is visible
    model = RobotModel(link_offsets=[[0, 0, 0.1], [0.2, 0, 0.1], [0, 0.1, 0.1], [0.05, 0, 0.05],
                                     [0, 0, 0.05], [0, 0, 0.05], [0, 0, 0.05], [0, 0, 0.02]],
                       joint_axes=[[0, 0, 1], [0, 1, 0], [0, 0, 1], [0, 1, 0], [0, 0, 1], [0, 1, 0], [0, 0, 1]],
                       joint_limits=[[-3.2, 3.2]] * 7, vel_limit=[1.0] * 7, accel_min=[-1.0] * 7,
                       accel_max=[1.0] * 7, reach=0.8)
    q = np.array([0.0, 0.3, -0.2, 0.5, 0.1, -0.4, 0.2])
    base = forward_keypoints(model, q)
    q[0] = np.pi
    turned = forward_keypoints(model, q)
    rz = np.diag([-1.0, -1.0, 1.0])
    assert np.allclose(turned, base @ rz.T, atol=1e-12)


def test_joint_limit_violation_rejected(model):
    q = np.zeros(7)
    q[1] = 2.5
    with pytest.raises(JointLimitError):
        forward_keypoints(model, q)


def test_invalid_model_rejected():
    good = RobotModel.default()
    with pytest.raises(ValueError):
        RobotModel(good.link_offsets, good.joint_axes, good.joint_limits, good.vel_limit,
                   accel_min=np.ones(7), accel_max=good.accel_max)
    with pytest.raises(ValueError):
        RobotModel(good.link_offsets * 2, good.joint_axes, good.joint_limits, good.vel_limit,
                   good.accel_min, good.accel_max, reach=0.8)
    with pytest.raises(ValueError):
        RobotModel(good.link_offsets, good.joint_axes, good.joint_limits, good.vel_limit,
                   good.accel_min, good.accel_max, keypoint_labels=ROBOT_KEYPOINTS[:8])


def test_batched_matches_single(model):
    rng = np.random.default_rng(0)
    q = rng.uniform(-1, 1, (5, 7))
    batch = forward_keypoints(model, q)
    for k in range(5):
        assert np.allclose(batch[k], forward_keypoints(model, q[k]))


def test_ee_speed_stationary_is_zero(model):
    assert ee_cartesian_speed(model, JointState(0.0, np.full(7, 0.2), np.zeros(7))) == 0.0


def test_ee_speed_single_revolute_joint():
    # EE 0.5 m from the joint-1 axis, spinning at 2 rad/s: v = r * omega = 1.0 m/s
    offsets = np.zeros((8, 3))
    offsets[1] = [0.5, 0.0, 0.0]
    model = RobotModel(offsets, [[0, 0, 1]] * 7, [[-3, 3]] * 7, [3.0] * 7, [-1.0] * 7, [1.0] * 7, reach=0.8)
    qd = np.zeros(7)
    qd[0] = 2.0
    speed = ee_cartesian_speed(model, JointState(0.0, np.zeros(7), qd))
    assert speed == pytest.approx(1.0, abs=1e-6)


@given(st.data())
def test_reach_bound(model, data):
    q = data.draw(_configs(model))
    kps = forward_keypoints(model, q)
    assert np.linalg.norm(kps[0] - kps[-1]) <= model.reach + 1e-12


@given(st.data())
def test_rigid_links(model, data):
    q = data.draw(_configs(model))
    kps = forward_keypoints(model, q)
    ref = forward_keypoints(model, np.zeros(7))
    assert np.allclose(np.linalg.norm(np.diff(kps, axis=0), axis=1),
                       np.linalg.norm(np.diff(ref, axis=0), axis=1), atol=1e-12)


@given(st.data(), st.lists(st.floats(-1e-3, 1e-3), min_size=7, max_size=7))
def test_lipschitz(model, data, dq):
    q = data.draw(_configs(model))
    dq = np.array(dq)
    moved = forward_keypoints(model, q + dq, check=False)
    # every keypoint is at most the total reach away from the rotating axes
    lip = model.reach * np.sqrt(model.n_joints)
    assert np.all(np.linalg.norm(moved - forward_keypoints(model, q), axis=1) <= lip * np.linalg.norm(dq) + 1e-12)


@given(st.data(), st.lists(st.floats(-1.5, 1.5), min_size=7, max_size=7))
def test_ee_speed_converges(model, data, qd):
    q = data.draw(_configs(model))
    state = JointState(0.0, q, np.array(qd))
    fine = ee_cartesian_speed(model, state, dt=1e-5)
    finer = ee_cartesian_speed(model, state, dt=1e-6)
    assert fine >= 0
    assert abs(fine - finer) < 1e-6
