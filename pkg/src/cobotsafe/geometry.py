"""Separation-distance and power/force-limiting numerics, keypoint-pair thresholds."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from .robot import ROBOT_KEYPOINTS

# OpenPose COCO upper-body keypoints 0-7 and 14-17.
HUMAN_KEYPOINTS: tuple[str, ...] = (
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist",
    "REye", "LEye", "REar", "LEar",
)
COCO_INDEX = dict(zip(HUMAN_KEYPOINTS, (0, 1, 2, 3, 4, 5, 6, 7, 14, 15, 16, 17)))
HEAD_KEYPOINTS: tuple[str, ...] = ("Nose", "REye", "LEye", "REar", "LEar")
# body-part class of each keypoint in the human compensation table
BODY_PART = {
    "Nose": "Nose", "Neck": "Neck", "REye": "Eye", "LEye": "Eye", "REar": "Ear", "LEar": "Ear",
    "RShoulder": "Arm", "LShoulder": "Arm", "RElbow": "Elbow", "LElbow": "Elbow",
    "RWrist": "Wrist", "LWrist": "Wrist",
}


@dataclass(frozen=True)
class SeparationParams:
    v_h: float = 1.6
    v_max: float = 1.0
    v_r: float | None = None  # average stopping speed, v_max / 2 when omitted
    t_r: float = 0.1
    t_s: float = 0.43
    C: float = 0.0
    Z_d: float = 0.0
    Z_r: float = 0.0001

    def __post_init__(self):
        if self.v_r is None:
            object.__setattr__(self, "v_r", self.v_max / 2)
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")


@dataclass(frozen=True)
class PflParams:
    M: float = 23.9
    m_L: float = 0.0
    m_h: float = 40.0
    p_max: float = 2.4e6
    A: float = 1e-4
    K: float = 2.5e4

    def __post_init__(self):
        for name in ("M", "m_h", "p_max", "A", "K"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.m_L < 0:
            raise ValueError("payload must be non-negative")


def protective_separation_distance(p: SeparationParams) -> float:
    """Sum of human travel, robot reaction, robot stopping and uncertainty terms."""
    s_h = (p.t_r + p.t_s) * p.v_h
    s_r = p.t_r * p.v_max
    s_s = p.t_s * p.v_r
    return s_h + s_r + s_s + p.C + p.Z_d + p.Z_r


def pfl_reduced_mass(m_h: float, M: float, m_L: float = 0.0) -> float:
    """Two-body reduced mass of the human region and the effective robot mass ``M/2 + m_L``."""
    if m_h <= 0 or M <= 0 or m_L < 0:
        raise ValueError("masses must be positive (payload non-negative)")
    m_r = M / 2 + m_L
    if math.isinf(m_h):
        return m_r
    return 1.0 / (1.0 / m_h + 1.0 / m_r)


def pfl_max_relative_speed(p: PflParams) -> float:
    mu = pfl_reduced_mass(p.m_h, p.M, p.m_L)
    return p.p_max * p.A / math.sqrt(mu * p.K)


def pfl_compliant(speed: float, p: PflParams) -> bool:
    """Whether a transient contact at ``speed`` stays within the pressure limit."""
    return speed < pfl_max_relative_speed(p)


@dataclass(frozen=True)
class BaseDistances:
    """Uncompensated regime-transition distances in metres."""

    stop_from_full: float = 1.17
    full_to_reduced: float = 0.73
    reduced_to_stop: float = 0.60

    def __post_init__(self):
        if min(self.stop_from_full, self.full_to_reduced, self.reduced_to_stop) <= 0:
            raise ValueError("base distances must be positive")

    @classmethod
    def derived(cls, sep: SeparationParams, reduced_speed: float, t_s_reduced: float | None = None) -> BaseDistances:
        """Formula-derived alternative to the constants.

        Full-to-reduced counts only the speed difference between ``sep.v_max`` and
        ``reduced_speed``; reduced-to-stop evaluates the separation formula at the
        reduced speed. These do not reproduce 0.73 / 0.60 exactly.
        """
        t_s_red = sep.t_s * reduced_speed / sep.v_max if t_s_reduced is None else t_s_reduced
        stop = protective_separation_distance(sep)
        red = SeparationParams(v_h=sep.v_h, v_max=reduced_speed, t_r=sep.t_r, t_s=t_s_red,
                               C=sep.C, Z_d=sep.Z_d, Z_r=sep.Z_r)
        diff = SeparationParams(v_h=sep.v_h, v_max=sep.v_max - reduced_speed, t_r=sep.t_r,
                                t_s=sep.t_s - t_s_red, C=0.0, Z_d=0.0, Z_r=0.0)
        return cls(stop, protective_separation_distance(diff), protective_separation_distance(red))


@dataclass(frozen=True)
class CompensationTable:
    """Bounding-sphere radii per robot keypoint and per human body part."""

    robot: dict
    human: dict

    def __post_init__(self):
        for side in (self.robot, self.human):
            for label, r in side.items():
                if r < 0:
                    raise ValueError(f"negative compensation for {label}")

    @classmethod
    def default(cls) -> CompensationTable:
        robot = dict(zip(ROBOT_KEYPOINTS, (0.01, 0.11, 0.15, 0.15, 0.15, 0.15, 0.15, 0.14, 0.10)))
        human = {"Nose": 0.10, "Neck": 0.25, "Eye": 0.10, "Ear": 0.10, "Arm": 0.15, "Elbow": 0.15, "Wrist": 0.15}
        return cls(robot=robot, human=human)

    @classmethod
    def zero(cls) -> CompensationTable:
        return cls(robot={k: 0.0 for k in ROBOT_KEYPOINTS}, human={k: 0.0 for k in set(BODY_PART.values())})

    def h(self, keypoint: str) -> float:
        part = BODY_PART.get(keypoint, keypoint)
        if part not in self.human:
            raise KeyError(f"no human compensation for {keypoint}")
        return self.human[part]

    def r(self, keypoint: str) -> float:
        if keypoint not in self.robot:
            raise KeyError(f"no robot compensation for {keypoint}")
        return self.robot[keypoint]


@dataclass(frozen=True)
class Thresholds:
    stop_from_full: float
    reduce: float
    stop_from_reduced: float


@dataclass(frozen=True)
class SeparationMatrix:
    """Per (human keypoint, robot keypoint) regime-transition thresholds."""

    thresholds: dict

    def __getitem__(self, pair) -> Thresholds:
        return self.thresholds[pair]

    def __contains__(self, pair) -> bool:
        return pair in self.thresholds

    @property
    def robot_keypoints(self) -> list[str]:
        return sorted({r for _, r in self.thresholds}, key=_robot_order)

    @property
    def human_keypoints(self) -> list[str]:
        return sorted({h for h, _ in self.thresholds}, key=_human_order)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["robot_kp", "human_kp", "stop_from_full", "reduce", "stop_from_reduced"])
        for r in self.robot_keypoints:
            for h in self.human_keypoints:
                if (h, r) in self.thresholds:
                    th = self.thresholds[(h, r)]
                    w.writerow([r, h, f"{th.stop_from_full:.4f}", f"{th.reduce:.4f}", f"{th.stop_from_reduced:.4f}"])
        return buf.getvalue()

    def table_layout(self, humans=("Nose", "RWrist"), robots=None) -> str:
        """Rows per robot keypoint, column groups stop-from-full / reduce / stop-from-reduced."""
        robots = list(robots or self.robot_keypoints)
        names = [BODY_PART.get(h, h) for h in humans]
        head = f"{'':>6} | " + " | ".join(
            "  ".join(f"{n:>6}" for n in names) for _ in range(3))
        lines = [f"{'':>6} | {'stop from full':^14} | {'reduce speed':^14} | {'stop from red.':^14}", head]
        for r in robots:
            cells = []
            for attr in ("stop_from_full", "reduce", "stop_from_reduced"):
                cells.append("  ".join(f"{getattr(self.thresholds[(h, r)], attr):6.2f}" for h in humans))
            lines.append(f"{r:>6} | " + " | ".join(cells))
        return "\n".join(lines)


def _robot_order(label: str) -> int:
    return ROBOT_KEYPOINTS.index(label) if label in ROBOT_KEYPOINTS else len(ROBOT_KEYPOINTS)


def _human_order(label: str) -> int:
    return HUMAN_KEYPOINTS.index(label) if label in HUMAN_KEYPOINTS else len(HUMAN_KEYPOINTS)


def build_separation_matrix(base: BaseDistances, comp: CompensationTable, humans=HUMAN_KEYPOINTS,
                            robots=ROBOT_KEYPOINTS) -> SeparationMatrix:
    """Add human and robot sphere radii to the base distances for every pair.

    The reduce threshold is the full-to-reduced distance on top of the compensated
    reduced-to-stop threshold.
    """
    out = {}
    for h in humans:
        for r in robots:
            margin = comp.h(h) + comp.r(r)
            stop_red = margin + base.reduced_to_stop
            out[(h, r)] = Thresholds(stop_from_full=margin + base.stop_from_full,
                                     reduce=base.full_to_reduced + stop_red,
                                     stop_from_reduced=stop_red)
    return SeparationMatrix(out)


def pairwise_distances(human: dict, robot_kps: np.ndarray, robot_labels=ROBOT_KEYPOINTS,
                       monitored=None) -> dict:
    """Euclidean distance for every (human keypoint, monitored robot keypoint) pair.

    ``human`` maps label to a 3-D position; low-confidence keypoints are expected
    to be filtered out beforehand. An empty ``human`` yields an empty map.
    """
    if not human:
        return {}
    labels = list(robot_labels)
    cols = [labels.index(r) for r in (monitored or labels)]
    h_labels = list(human)
    H = np.array([human[h] for h in h_labels], dtype=float)
    R = np.asarray(robot_kps, dtype=float)[cols]
    D = np.linalg.norm(H[:, None, :] - R[None, :, :], axis=-1)
    return {(h, labels[c]): float(D[i, j]) for i, h in enumerate(h_labels) for j, c in enumerate(cols)}
