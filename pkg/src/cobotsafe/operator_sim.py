"""Scripted human keypoint streams standing in for an RGB-D pose pipeline."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .geometry import HUMAN_KEYPOINTS

CONFIDENCE_THRESHOLD = 0.6

# Offsets from the neck in a body frame (forward, left, up), metres.
_HEAD = {
    "Nose": (0.08, 0.0, 0.15), "Neck": (0.0, 0.0, 0.0),
    "REye": (0.06, -0.035, 0.19), "LEye": (0.06, 0.035, 0.19),
    "REar": (-0.02, -0.08, 0.16), "LEar": (-0.02, 0.08, 0.16),
    "RShoulder": (0.0, -0.2, -0.05), "LShoulder": (0.0, 0.2, -0.05),
}
_ARMS_DOWN = {
    "RElbow": (0.0, -0.22, -0.33), "RWrist": (0.05, -0.22, -0.58),
    "LElbow": (0.0, 0.22, -0.33), "LWrist": (0.05, 0.22, -0.58),
}
_ARMS_REACH = {
    "RElbow": (0.28, -0.2, -0.15), "RWrist": (0.55, -0.18, -0.25),
    "LElbow": (0.0, 0.22, -0.33), "LWrist": (0.05, 0.22, -0.58),
}


class ReplayFormatError(ValueError):
    def __init__(self, line: int, field_name: str, message: str):
        super().__init__(f"line {line}: {field_name}: {message}")
        self.line = line
        self.field = field_name


@dataclass(frozen=True)
class KeypointFrame:
    t: float
    keypoints: dict  # label -> (position (3,), confidence)

    def __post_init__(self):
        for label, (_, conf) in self.keypoints.items():
            if label not in HUMAN_KEYPOINTS:
                raise ValueError(f"unknown keypoint label {label!r}")
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"confidence of {label} outside [0, 1]")

    def positions(self) -> dict:
        return {k: np.asarray(p, dtype=float) for k, (p, _) in self.keypoints.items()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, KeypointFrame) or self.t != other.t or self.keypoints.keys() != other.keypoints.keys():
            return False
        return all(np.array_equal(self.keypoints[k][0], other.keypoints[k][0])
                   and self.keypoints[k][1] == other.keypoints[k][1] for k in self.keypoints)


def posture_offsets(reach: float = 0.0) -> dict:
    """Body-frame offsets of every keypoint; ``reach`` blends the right arm forward."""
    return dict(zip(HUMAN_KEYPOINTS, _offset_array(reach)))


_DOWN = np.array([{**_HEAD, **_ARMS_DOWN}[k] for k in HUMAN_KEYPOINTS], dtype=float)
_REACH = np.array([{**_HEAD, **_ARMS_REACH}[k] for k in HUMAN_KEYPOINTS], dtype=float)


def _offset_array(reach: float) -> np.ndarray:
    return _DOWN if reach == 0.0 else (1 - reach) * _DOWN + reach * _REACH


@dataclass(frozen=True)
class OperatorScript:
    """Piecewise-linear neck trajectory with posture, noise and dropout settings.

    ``waypoints`` are ``(t, (x, y, z))`` of the neck; ``reach`` optionally lists
    ``(t, fraction)`` knots for the right-arm reach. The operator faces
    ``facing`` (a point in the horizontal plane).
    """

    waypoints: tuple
    reach: tuple = ()
    facing: tuple = (0.0, 0.0)
    speed_cap: float = 1.6
    noise_sigma: float = 0.0
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        times = [w[0] for w in self.waypoints]
        if len(times) < 1 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        for (t0, p0), (t1, p1) in zip(self.waypoints, self.waypoints[1:]):
            v = np.linalg.norm(np.subtract(p1, p0)) / (t1 - t0)
            if v > self.speed_cap * (1 + 1e-9):
                raise ValueError(f"operator speed {v:.3f} m/s exceeds cap {self.speed_cap} m/s")
        if not 0.0 <= self.dropout_prob <= 1.0 or self.noise_sigma < 0:
            raise ValueError("invalid noise or dropout setting")
        object.__setattr__(self, "_times", [float(t) for t in times])
        object.__setattr__(self, "_pts", np.array([w[1] for w in self.waypoints], dtype=float))

    @property
    def span(self) -> tuple[float, float]:
        return self.waypoints[0][0], self.waypoints[-1][0]

    def neck(self, t: float) -> np.ndarray:
        times, pts = self._times, self._pts
        if t <= times[0]:
            return pts[0].copy()
        if t >= times[-1]:
            return pts[-1].copy()
        i = bisect.bisect_right(times, t) - 1
        w = (t - times[i]) / (times[i + 1] - times[i])
        return (1 - w) * pts[i] + w * pts[i + 1]

    def reach_at(self, t: float) -> float:
        if not self.reach:
            return 0.0
        return float(np.interp(t, [r[0] for r in self.reach], [r[1] for r in self.reach]))

    def template(self, t: float) -> dict:
        """Noise-free keypoint positions at ``t``."""
        return body_keypoints(self.neck(t), self.facing, self.reach_at(t))


def body_keypoints(neck, facing, reach: float = 0.0) -> dict:
    """Keypoints of an upright operator with the neck at ``neck`` facing the point ``facing``."""
    neck = np.asarray(neck, dtype=float)
    fx, fy = facing[0] - neck[0], facing[1] - neck[1]
    norm = math.hypot(fx, fy)
    fx, fy = (fx / norm, fy / norm) if norm > 1e-9 else (1.0, 0.0)
    basis = np.array([[fx, fy, 0.0], [-fy, fx, 0.0], [0.0, 0.0, 1.0]])
    pts = neck + _offset_array(reach) @ basis
    return dict(zip(HUMAN_KEYPOINTS, pts))


def noisy_frame(template: dict, t: float, noise_sigma: float, dropout_prob: float, seed: int) -> KeypointFrame:
    """Add Gaussian jitter and random dropouts to noise-free keypoints.

    A dropped keypoint is either missing or reported with sub-threshold
    confidence. Randomness is keyed on ``(seed, t)`` so frames do not depend on
    query order.
    """
    labels = [k for k in HUMAN_KEYPOINTS if k in template]
    pts = np.array([template[k] for k in labels], dtype=float).reshape(-1, 3)
    conf = np.full(len(labels), 0.9)
    keep = np.ones(len(labels), dtype=bool)
    if noise_sigma > 0 or dropout_prob > 0:
        rng = np.random.default_rng([seed, int(round(t * 1e6))])
        pts = pts + rng.normal(0.0, noise_sigma, pts.shape)
        u = rng.random((len(labels), 2))
        dropped = u[:, 0] < dropout_prob
        keep = ~(dropped & (u[:, 1] < 0.5))
        conf[dropped] = 0.3
    return KeypointFrame(t, {k: (pts[i], float(conf[i])) for i, k in enumerate(labels) if keep[i]})


def generate_frame(script: OperatorScript, t: float) -> KeypointFrame:
    lo, hi = script.span
    if t < lo - 1e-12 or t > hi + 1e-12:
        return KeypointFrame(t, {})
    return noisy_frame(script.template(t), t, script.noise_sigma, script.dropout_prob, script.seed)


def filter_confidence(frame: KeypointFrame, threshold: float = CONFIDENCE_THRESHOLD) -> KeypointFrame:
    return KeypointFrame(frame.t, {k: v for k, v in frame.keypoints.items() if v[1] >= threshold})


def stream(script: OperatorScript, dt: float, t_end: float | None = None) -> Iterator[KeypointFrame]:
    lo, hi = script.span
    t_end = hi if t_end is None else t_end
    for k in range(int(math.floor(t_end / dt + 1e-9)) + 1):
        yield generate_frame(script, round(k * dt, 6))


def write_stream(frames: Iterable[KeypointFrame], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t,label,x,y,z,confidence\n")
        for frame in frames:
            for label, (p, conf) in frame.keypoints.items():
                x, y, z = (float(v) for v in p)
                fh.write(f"{frame.t:.6f},{label},{x!r},{y!r},{z!r},{float(conf)!r}\n")


def replay_stream(path) -> list[KeypointFrame]:
    """Parse a ``t,label,x,y,z,confidence`` file into frames grouped by time.

    Frames with no keypoints cannot be represented and do not appear.
    """
    frames: list[KeypointFrame] = []
    current_t, current = None, {}
    names = ("t", "label", "x", "y", "z", "confidence")
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 6:
            raise ReplayFormatError(lineno, "row", f"expected 6 fields, got {len(parts)}")
        values = []
        for name, text in zip(names, parts):
            if name == "label":
                if text not in HUMAN_KEYPOINTS:
                    raise ReplayFormatError(lineno, name, f"unknown keypoint {text!r}")
                values.append(text)
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ReplayFormatError(lineno, name, f"not a number: {text!r}") from None
        t, label, x, y, z, conf = values
        if not 0.0 <= conf <= 1.0:
            raise ReplayFormatError(lineno, "confidence", "outside [0, 1]")
        if current_t is not None and t < current_t:
            raise ReplayFormatError(lineno, "t", f"time {t} earlier than {current_t}")
        if current_t is not None and t != current_t:
            frames.append(KeypointFrame(current_t, current))
            current = {}
        if label in current:
            raise ReplayFormatError(lineno, "label", f"duplicate keypoint {label} at t={t}")
        current_t = t
        current[label] = (np.array([x, y, z]), conf)
    if current_t is not None:
        frames.append(KeypointFrame(current_t, current))
    return frames


@dataclass
class ReplaySource:
    """Zero-order hold over replayed frames: the latest frame at or before ``t``."""

    frames: list
    _times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._times = np.array([f.t for f in self.frames])

    def frame_at(self, t: float) -> KeypointFrame:
        i = int(np.searchsorted(self._times, t + 1e-9, side="right")) - 1
        if i < 0:
            return KeypointFrame(t, {})
        return self.frames[i]


# ------------------------------------------------------------------ live sources
# Sources feed the simulation loop tick by tick. ``truth_at`` gives noise-free
# positions (used for contact checks); ``frame_at`` what the sensor reports.


class NoOperator:
    def on_cycle_start(self, t: float) -> None:
        pass

    def truth_at(self, t: float, robot_kps=None) -> dict:
        return {}

    def frame_at(self, t: float, robot_kps=None) -> KeypointFrame:
        return KeypointFrame(t, {})


class ScriptSource(NoOperator):
    def __init__(self, script: OperatorScript):
        self.script = script

    def truth_at(self, t: float, robot_kps=None) -> dict:
        lo, hi = self.script.span
        return self.script.template(t) if lo - 1e-12 <= t <= hi + 1e-12 else {}

    def frame_at(self, t: float, robot_kps=None) -> KeypointFrame:
        return generate_frame(self.script, t)


class ReplayOperator(NoOperator):
    def __init__(self, frames: list):
        self.source = ReplaySource(frames)

    def frame_at(self, t: float, robot_kps=None) -> KeypointFrame:
        return self.source.frame_at(t)

    def truth_at(self, t: float, robot_kps=None) -> dict:
        return self.source.frame_at(t).positions()


@dataclass
class CyclicVisits(NoOperator):
    """Operator who waits at ``standby`` and, after each robot cycle start, walks to
    ``work``, reaches with the right arm for ``reach_time`` seconds and walks back."""

    standby: tuple = (2.6, -0.4, 0.7)
    work: tuple = (1.0, -0.35, 0.7)
    facing: tuple = (0.3, -0.3)
    walk_speed: float = 1.2
    reach_time: float = 2.0
    delay: float = 0.3
    every: int = 1
    noise_sigma: float = 0.0
    dropout_prob: float = 0.0
    seed: int = 0
    visits: list = field(default_factory=list, compare=False)
    _cycles: int = field(default=0, repr=False, compare=False)
    _cache: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.walk_speed <= 0 or self.walk_speed > 1.6 or self.reach_time < 0 or self.every < 1:
            raise ValueError("invalid cyclic operator settings")
        self._walk = float(np.linalg.norm(np.subtract(self.work, self.standby))) / self.walk_speed
        self._scripts: dict = {}

    @property
    def visit_duration(self) -> float:
        return 2 * self._walk + self.reach_time

    def visit_script(self, t0: float) -> OperatorScript:
        if t0 not in self._scripts:
            self._scripts[t0] = self._make_script(t0)
        return self._scripts[t0]

    def _make_script(self, t0: float) -> OperatorScript:
        w, r = self._walk, self.reach_time
        ramp = min(0.4, r / 2)
        waypoints = ((t0, self.standby), (t0 + w, self.work), (t0 + w + r, self.work), (t0 + 2 * w + r, self.standby))
        reach = ((t0 + w, 0.0), (t0 + w + ramp, 1.0), (t0 + w + r - ramp, 1.0), (t0 + w + r, 0.0))
        return OperatorScript(waypoints, reach=reach, facing=self.facing, speed_cap=1.6)

    def fresh(self) -> CyclicVisits:
        return replace(self, visits=[], _cycles=0, _cache=None)

    def on_cycle_start(self, t: float) -> None:
        if self._cycles % self.every == 0:
            self.visits.append(t + self.delay)
        self._cycles += 1

    def truth_at(self, t: float, robot_kps=None) -> dict:
        if self._cache is not None and self._cache[0] == t and self._cache[1] == len(self.visits):
            return self._cache[2]
        out = self._truth(t)
        self._cache = (t, len(self.visits), out)
        return out

    def _truth(self, t: float) -> dict:
        for t0 in reversed(self.visits):
            if t0 <= t <= t0 + self.visit_duration:
                return self.visit_script(t0).template(t)
            if t0 <= t:
                break
        return body_keypoints(self.standby, self.facing)

    def frame_at(self, t: float, robot_kps=None) -> KeypointFrame:
        return noisy_frame(self.truth_at(t), t, self.noise_sigma, self.dropout_prob, self.seed)


class PursuitOperator(NoOperator):
    """Worst-case operator sprinting horizontally at ``speed`` from ``t_start`` on.

    With ``pursue`` false the neck runs in a straight line at the position robot
    keypoint ``target`` had when the sprint began and keeps going; with ``pursue``
    it re-aims at the keypoint's current position every tick and stops on top of
    it. Must be queried with non-decreasing ``t`` and that tick's robot keypoints.
    """

    def __init__(self, start, target: str, robot_labels=None, speed: float = 1.6, t_start: float = 0.0,
                 reach: float = 0.0, pursue: bool = False):
        from .robot import ROBOT_KEYPOINTS

        self._args = (tuple(np.asarray(start, dtype=float)), target, robot_labels, speed, t_start, reach, pursue)
        labels = list(robot_labels or ROBOT_KEYPOINTS)
        self.neck = np.asarray(start, dtype=float).copy()
        self.target = labels.index(target)
        self.speed, self.t_start, self.reach, self.pursue = speed, t_start, reach, pursue
        self._t = None
        self._heading = None
        self._facing = (0.0, 0.0)
        self._cache = None

    def fresh(self) -> PursuitOperator:
        return PursuitOperator(*self._args)

    def __eq__(self, other):
        return isinstance(other, PursuitOperator) and self._args == other._args

    def truth_at(self, t: float, robot_kps=None) -> dict:
        if self._cache is not None and self._cache[0] == t:
            return self._cache[1]
        goal = np.asarray(robot_kps)[self.target]
        gap = goal[:2] - self.neck[:2]
        if self._heading is None or self.pursue:
            norm = float(np.linalg.norm(gap))
            if t <= self.t_start or norm > 1e-6:
                self._heading = gap / norm if norm > 1e-9 else np.zeros(2)
        if self._t is not None and t > self.t_start:
            step = self.speed * (t - max(self._t, self.t_start))
            if self.pursue:
                step = min(step, float(np.linalg.norm(gap)))
            self.neck[:2] += self._heading * step
        self._t = t
        self._facing = tuple(self.neck[:2] + self._heading)
        out = body_keypoints(self.neck, self._facing, self.reach)
        self._cache = (t, out)
        return out

    def frame_at(self, t: float, robot_kps=None) -> KeypointFrame:
        return noisy_frame(self.truth_at(t, robot_kps), t, 0.0, 0.0, 0)


def adversarial_operators(targets=("EE", "J5", "J3"), n_azimuth: int = 8, distance: float = 3.0,
                          height: float = 0.7, t_start: float = 0.5, speed: float = 1.6,
                          pursue: bool = False) -> list:
    """Sprinting operators starting ``distance`` from the base on ``n_azimuth`` evenly spaced bearings."""
    out = []
    for target in targets:
        for k in range(n_azimuth):
            a = 2 * math.pi * k / n_azimuth
            start = (distance * math.cos(a), distance * math.sin(a), height)
            out.append(PursuitOperator(start, target, speed=speed, t_start=t_start, pursue=pursue))
    return out
