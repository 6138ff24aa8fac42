"""Kinematic stand-in for a 7-DoF collaborative arm.

The chain is stylised (alternating z/y joint axes, straight-up zero pose); only the
positions of the nine monitored keypoints matter to the safety math.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROBOT_KEYPOINTS: tuple[str, ...] = ("EE", "J7", "J6", "J5", "J4", "J3", "J2", "J1", "Base")


class JointLimitError(ValueError):
    """Raised when a joint configuration lies outside the model's joint limits."""


def _rotation(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    # Rodrigues formula, batched over the leading dimensions of ``angle``.
    k = np.asarray(axis, dtype=float)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    c = np.cos(angle)[..., None, None]
    s = np.sin(angle)[..., None, None]
    return c * np.eye(3) + s * kx + (1.0 - c) * np.outer(k, k)


@dataclass(frozen=True)
class RobotModel:
    """Serial chain geometry and limits.

    ``link_offsets[0]`` places J1 relative to the base, ``link_offsets[i]`` places
    joint ``i+1`` (or the EE for the last entry) in the frame of joint ``i``.
    """

    link_offsets: np.ndarray  # (n_joints + 1, 3)
    joint_axes: np.ndarray  # (n_joints, 3)
    joint_limits: np.ndarray  # (n_joints, 2)
    vel_limit: np.ndarray
    accel_min: np.ndarray
    accel_max: np.ndarray
    reach: float = 0.8
    keypoint_labels: tuple[str, ...] = field(default=ROBOT_KEYPOINTS)

    def __post_init__(self):
        for name in ("link_offsets", "joint_axes", "joint_limits", "vel_limit", "accel_min", "accel_max"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        n = self.joint_axes.shape[0]
        if self.link_offsets.shape != (n + 1, 3):
            raise ValueError(f"link_offsets must have shape ({n + 1}, 3)")
        if len(self.keypoint_labels) != n + 2:
            raise ValueError(f"expected {n + 2} keypoint labels, got {len(self.keypoint_labels)}")
        if self.joint_limits.shape != (n, 2) or np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValueError("joint_limits must be (n, 2) with min < max")
        norms = np.linalg.norm(self.joint_axes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("joint axes must be unit vectors")
        if np.any(self.vel_limit <= 0):
            raise ValueError("velocity limits must be positive")
        if np.any(self.accel_min >= 0) or np.any(self.accel_max <= 0):
            raise ValueError("acceleration limits must satisfy a_min < 0 < a_max")
        if self.reach <= 0:
            raise ValueError("reach must be positive")
        if np.linalg.norm(self.link_offsets, axis=1).sum() > self.reach + 1e-9:
            raise ValueError("sum of link lengths exceeds the declared reach")

    @property
    def n_joints(self) -> int:
        return self.joint_axes.shape[0]

    @classmethod
    def default(cls) -> RobotModel:
        """Stylised 7-DoF arm with 0.8 m total reach."""
        lengths = [0.08, 0.12, 0.15, 0.15, 0.15, 0.10, 0.03, 0.02]
        z, y = [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]
        deg = np.deg2rad
        return cls(
            link_offsets=[[0.0, 0.0, length] for length in lengths],
            joint_axes=[z, y, z, y, z, y, z],
            joint_limits=[[-deg(a), deg(a)] for a in (170, 120, 170, 120, 170, 120, 175)],
            vel_limit=deg(np.array([98, 98, 100, 130, 140, 180, 180])),
            accel_min=[-2.868] * 7,
            accel_max=[2.868] * 7,
            reach=0.8,
        )

    def check_limits(self, q) -> None:
        q = np.asarray(q, dtype=float)
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        bad = (q < lo - 1e-12) | (q > hi + 1e-12)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise JointLimitError(f"joint {idx[-1] + 1} outside limits: {q[tuple(idx)]:.6f} rad")


@dataclass(frozen=True)
class JointState:
    t: float
    q: np.ndarray
    qd: np.ndarray


def forward_keypoints(model: RobotModel, q, check: bool = True) -> np.ndarray:
    """Keypoint positions in the base frame, ordered EE, J7 ... J1, Base.

    ``q`` may carry leading batch dimensions; the result then has shape
    ``(..., 9, 3)``.
    """
    q = np.asarray(q, dtype=float)
    if check:
        model.check_limits(q)
    batch = q.shape[:-1]
    n = model.n_joints
    points = np.zeros(batch + (n + 2, 3))
    R = np.broadcast_to(np.eye(3), batch + (3, 3))
    p = np.zeros(batch + (3,))
    # points[0] is the base; filled in chain order then reversed.
    p = p + model.link_offsets[0]
    points[..., 1, :] = p
    for j in range(n):
        R = R @ _rotation(model.joint_axes[j], q[..., j])
        p = p + R @ model.link_offsets[j + 1]
        points[..., j + 2, :] = p
    return points[..., ::-1, :]


def ee_cartesian_speed(model: RobotModel, state: JointState, dt: float = 1e-3) -> float:
    """EE speed from a central difference of the keypoint map over ``dt``."""
    q = np.asarray(state.q, dtype=float)
    qd = np.asarray(state.qd, dtype=float)
    if not np.any(qd):
        return 0.0
    ends = forward_keypoints(model, np.stack([q + qd * dt, q - qd * dt]), check=False)[:, 0, :]
    return float(np.linalg.norm(ends[0] - ends[1]) / (2.0 * dt))
