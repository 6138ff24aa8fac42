"""Joint trajectories: nominal point-to-point motion, stopping, slow-down and resume.

Every executed trajectory is a re-timing of a nominal (full speed) path. Samples
carry the nominal path time ``s`` they correspond to, so that any later speed
change can be stitched back onto the same path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, minimize_scalar

from .robot import JointLimitError, RobotModel, forward_keypoints

_EPS_T = 1e-9


@dataclass(frozen=True)
class TimingBudget:
    """Worst-case stop-plan computation time, reaction time and control tick."""

    t_calc: float = 0.02
    t_r: float = 0.1
    dt: float = 0.005

    def __post_init__(self):
        if min(self.t_calc, self.t_r, self.dt) <= 0:
            raise ValueError("timing budget entries must be strictly positive")
        if self.t_calc >= self.t_r:
            raise ValueError("t_calc must be smaller than the reaction time t_r")


def stop_time_per_joint(qd_ref, a_min, a_max):
    """Minimal time for each joint to brake from ``qd_ref`` to rest."""
    qd_ref, a_min, a_max = (np.asarray(x, dtype=float) for x in (qd_ref, a_min, a_max))
    if np.any(a_min >= 0) or np.any(a_max <= 0):
        raise ValueError("acceleration limits must satisfy a_min < 0 < a_max")
    t = np.where(qd_ref >= 0, (0.0 - qd_ref) / a_min, (0.0 - qd_ref) / a_max)
    return t if t.ndim else float(t)


# --------------------------------------------------------------------------- paths


@dataclass(frozen=True)
class MotionSegment:
    """Straight joint-space move with a synchronised trapezoidal profile.

    The profile is expressed in the joint-space arc length ``u``; every joint
    follows ``q0 + direction * u``.
    """

    q0: np.ndarray
    q1: np.ndarray
    speed: float  # cruise speed along u
    accel: float  # acceleration/deceleration along u

    def __post_init__(self):
        length = float(np.linalg.norm(self.q1 - self.q0))
        if length <= 0:
            raise ValueError("motion segment has zero length")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "direction", (self.q1 - self.q0) / length)
        if length <= self.speed**2 / self.accel:
            t_acc = math.sqrt(length / self.accel)
            peak, t_cruise = self.accel * t_acc, 0.0
        else:
            t_acc = self.speed / self.accel
            peak, t_cruise = self.speed, (length - self.speed**2 / self.accel) / self.speed
        object.__setattr__(self, "t_acc", t_acc)
        object.__setattr__(self, "peak", peak)
        object.__setattr__(self, "t_cruise", t_cruise)
        object.__setattr__(self, "duration", 2 * t_acc + t_cruise)

    def profile(self, tau):
        """Arc length, speed and acceleration along the segment at local time ``tau``."""
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, self.duration)
        a, ta, tc, T, vp = self.accel, self.t_acc, self.t_cruise, self.duration, self.peak
        u_acc = 0.5 * a * ta**2
        rising, cruising = tau < ta, tau < ta + tc
        u = np.where(rising, 0.5 * a * tau**2,
                     np.where(cruising, u_acc + vp * (tau - ta), self.length - 0.5 * a * (T - tau) ** 2))
        ud = np.where(rising, a * tau, np.where(cruising, vp, a * (T - tau)))
        udd = np.where(rising, a, np.where(cruising, 0.0, -a))
        udd = np.where(tau >= T, 0.0, udd)
        return u, ud, udd

    def time_at(self, u: float) -> float:
        u = min(max(float(u), 0.0), self.length)
        u_acc = 0.5 * self.accel * self.t_acc**2
        if u <= u_acc:
            return math.sqrt(2 * u / self.accel)
        if u <= self.length - u_acc:
            return self.t_acc + (u - u_acc) / self.peak
        return self.duration - math.sqrt(max(0.0, 2 * (self.length - u) / self.accel))


@dataclass(frozen=True)
class Dwell:
    q: np.ndarray
    duration: float


class TaskPath:
    """Concatenation of straight motions and dwells, indexed by nominal time ``s``."""

    def __init__(self, segments: Sequence[MotionSegment | Dwell]):
        if not segments:
            raise ValueError("a path needs at least one segment")
        self.segments = list(segments)
        self.starts = np.concatenate([[0.0], np.cumsum([seg.duration for seg in self.segments])])
        self.duration = float(self.starts[-1])
        last = self.segments[-1]
        self.end_q = np.array(last.q1 if isinstance(last, MotionSegment) else last.q)

    def segment_index(self, s) -> np.ndarray:
        idx = np.searchsorted(self.starts, s, side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def is_dwell(self, s) -> np.ndarray:
        idx = self.segment_index(s)
        return np.array([isinstance(self.segments[i], Dwell) for i in np.atleast_1d(idx)]).reshape(np.shape(idx))

    def evaluate(self, s):
        """Position, nominal velocity and nominal acceleration at path times ``s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        n = self.end_q.size
        q, dq, ddq = np.zeros((s.size, n)), np.zeros((s.size, n)), np.zeros((s.size, n))
        idx = self.segment_index(s)
        for i in np.unique(idx):
            mask = idx == i
            seg = self.segments[i]
            if isinstance(seg, Dwell):
                q[mask] = seg.q
                continue
            u, ud, udd = seg.profile(s[mask] - self.starts[i])
            q[mask] = seg.q0 + np.outer(u, seg.direction)
            dq[mask] = np.outer(ud, seg.direction)
            ddq[mask] = np.outer(udd, seg.direction)
        return q, dq, ddq

    def direction(self, s: float) -> np.ndarray:
        seg = self.segments[int(self.segment_index(s))]
        return seg.direction if isinstance(seg, MotionSegment) else np.zeros_like(self.end_q)

    def locate(self, q, s_hint: float) -> float:
        """Path time of configuration ``q`` on the segment containing ``s_hint``."""
        i = int(self.segment_index(s_hint))
        seg = self.segments[i]
        if isinstance(seg, Dwell):
            return float(s_hint)
        u = float(np.dot(np.asarray(q) - seg.q0, seg.direction))
        return max(float(s_hint), float(self.starts[i] + seg.time_at(u)))

    def rate(self, s: float, scale: float) -> float:
        # dwell time is fixed; motion time scales with the commanded speed
        return 1.0 if bool(self.is_dwell(s)) else scale


class SampledPath:
    """Path view of an arbitrary sampled trajectory (Hermite interpolation, s = t)."""

    def __init__(self, t, q, qd):
        self.t = np.asarray(t, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.spline = CubicHermiteSpline(self.t, self.q, np.asarray(qd, dtype=float), axis=0)
        self.d1 = self.spline.derivative(1)
        self.d2 = self.spline.derivative(2)
        self.starts = np.array([self.t[0], self.t[-1]])
        self.duration = float(self.t[-1])
        self.end_q = self.q[-1].copy()

    def is_dwell(self, s):
        return np.zeros(np.shape(s), dtype=bool)

    def evaluate(self, s):
        s = np.clip(np.atleast_1d(np.asarray(s, dtype=float)), self.t[0], self.t[-1])
        return self.spline(s), self.d1(s), self.d2(s)

    def direction(self, s: float) -> np.ndarray:
        v = self.d1(min(max(s, self.t[0]), self.t[-1]))
        n = np.linalg.norm(v)
        return v / n if n > 0 else np.zeros_like(v)

    def locate(self, q, s_hint: float) -> float:
        ahead = self.t >= s_hint - _EPS_T
        if not np.any(ahead):
            return float(self.t[-1])
        cand = np.flatnonzero(ahead)
        k = cand[np.argmin(np.linalg.norm(self.q[cand] - q, axis=1))]
        lo = max(s_hint, self.t[max(k - 1, 0)])
        hi = self.t[min(k + 1, len(self.t) - 1)]
        if hi - lo <= _EPS_T:
            return float(lo)
        res = minimize_scalar(lambda x: float(np.sum((self.spline(x) - q) ** 2)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        return float(res.x)

    def rate(self, s: float, scale: float) -> float:
        return scale


# --------------------------------------------------------------------- trajectory


@dataclass
class JointTrajectory:
    """Fixed-tick samples ``(t, q, qd, qdd)`` plus the nominal path they re-time."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    vel_limit: np.ndarray
    accel_min: np.ndarray
    accel_max: np.ndarray
    dt: float
    s: np.ndarray | None = None
    path: TaskPath | SampledPath | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("t", "q", "qd", "qdd", "vel_limit", "accel_min", "accel_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.q.ndim != 2 or self.q.shape != self.qd.shape or self.q.shape != self.qdd.shape:
            raise ValueError("q, qd and qdd must share shape (N, n_joints)")
        if self.t.shape[0] != self.q.shape[0]:
            raise ValueError("t and q lengths differ")
        if self.t.size > 1 and np.any(np.abs(np.diff(self.t) - self.dt) > 1e-9):
            raise ValueError("samples must be on a constant tick")
        if self.s is None:
            self.s = self.t - self.t[0]
        if self.path is None and len(self.t) > 1:
            self.path = SampledPath(self.t - self.t[0], self.q, self.qd)

    def __len__(self) -> int:
        return self.t.size

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def finished(self) -> bool:
        """True when the last sample sits at the end of the nominal path, at rest."""
        return self.path is None or (self.s[-1] >= self.path.duration - _EPS_T and not np.any(self.qd[-1]))

    def index_at(self, t: float) -> int:
        """Index of the earliest sample with time >= t (len(self) if none)."""
        return int(np.searchsorted(self.t, t - _EPS_T, side="left"))

    def _select(self, sl) -> dict:
        return dict(t=self.t[sl], q=self.q[sl], qd=self.qd[sl], qdd=self.qdd[sl], s=self.s[sl])

    def _build(self, parts: Sequence[dict]) -> JointTrajectory:
        cat = {k: np.concatenate([p[k] for p in parts]) for k in ("t", "q", "qd", "qdd", "s")}
        return JointTrajectory(vel_limit=self.vel_limit, accel_min=self.accel_min, accel_max=self.accel_max,
                               dt=self.dt, path=self.path, **cat)

    def hold_until(self, t_until: float) -> JointTrajectory:
        """Extend with stationary samples at the final pose up to ``t_until``."""
        extra = int(math.ceil((t_until - self.t_end) / self.dt - 1e-9))
        if extra <= 0:
            return self
        n = self.q.shape[1]
        hold = dict(t=self.t_end + self.dt * np.arange(1, extra + 1),
                    q=np.repeat(self.q[-1:], extra, axis=0), qd=np.zeros((extra, n)),
                    qdd=np.zeros((extra, n)), s=np.repeat(self.s[-1:], extra))
        return self._build([self._select(slice(None)), hold])

    def max_abs_velocity(self) -> np.ndarray:
        return np.max(np.abs(self.qd), axis=0)

    def to_csv(self, path) -> None:
        n = self.q.shape[1]
        header = ["t"] + [f"q{j + 1}" for j in range(n)] + [f"qd{j + 1}" for j in range(n)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(len(self)):
                writer.writerow([f"{self.t[k]:.6f}"] + [f"{x:.9f}" for x in self.q[k]]
                                + [f"{x:.9f}" for x in self.qd[k]])

    @classmethod
    def from_csv(cls, path, model: RobotModel) -> JointTrajectory:
        data = np.loadtxt(FilePath(path), delimiter=",", skiprows=1, ndmin=2)
        n = model.n_joints
        t, q, qd = data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n]
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.005
        qdd = np.gradient(qd, dt, axis=0) if len(t) > 1 else np.zeros_like(qd)
        return cls(t=t, q=q, qd=qd, qdd=qdd, vel_limit=model.vel_limit, accel_min=model.accel_min,
                   accel_max=model.accel_max, dt=dt)


def check_trajectory(traj: JointTrajectory, vel_tol: float = 1e-9, acc_tol: float = 1e-6) -> list[str]:
    """Return a list of limit or consistency violations (empty when valid).

    Velocity consistency uses the trapezoid rule per tick. When the acceleration
    switches inside a tick the rule is off by at most ``|qdd[k+1]-qdd[k]| dt / 8``,
    which is added to the ``1e-6 * vel_limit`` tolerance.
    """
    problems = []
    if len(traj) > 1 and np.any(np.diff(traj.t) <= 0):
        problems.append("time not strictly increasing")
    over = np.abs(traj.qd) > traj.vel_limit * (1 + vel_tol)
    if np.any(over):
        problems.append(f"velocity limit exceeded at sample {np.argwhere(over)[0][0]}")
    if np.any(traj.qdd < traj.accel_min - acc_tol) or np.any(traj.qdd > traj.accel_max + acc_tol):
        problems.append("acceleration limit exceeded")
    if len(traj) > 1:
        dt = traj.dt
        mean_v = 0.5 * (traj.qd[1:] + traj.qd[:-1])
        err = np.abs(np.diff(traj.q, axis=0) / dt - mean_v)
        allowed = 1e-6 * traj.vel_limit + np.abs(np.diff(traj.qdd, axis=0)) * dt / 8 + 1e-12
        if np.any(err > allowed):
            problems.append(f"velocity inconsistent with positions at tick {np.argwhere(err > allowed)[0][0]}")
    if len(traj) > 2:
        dd = (traj.q[2:] - 2 * traj.q[1:-1] + traj.q[:-2]) / traj.dt**2
        if np.any(dd < traj.accel_min - acc_tol) or np.any(dd > traj.accel_max + acc_tol):
            problems.append("discrete second difference exceeds acceleration limits")
    return problems


# ------------------------------------------------------------------------ stopping


@dataclass(frozen=True)
class StopPlan:
    """Quadratic braking polynomials ``q_j(tau) = b0 + b1 tau + b2 tau^2`` from the reference state."""

    t_ref: float
    q_ref: np.ndarray
    qd_ref: np.ndarray
    t_e: float
    coefficients: np.ndarray  # (n, 3)
    index: int = 0
    s_ref: float = 0.0

    @property
    def empty(self) -> bool:
        return self.t_e == 0.0

    def evaluate(self, tau):
        tau = np.clip(np.atleast_1d(np.asarray(tau, dtype=float)), 0.0, self.t_e)
        b0, b1, b2 = self.coefficients.T
        q = b0 + np.outer(tau, b1) + np.outer(tau**2, b2)
        qd = b1 + np.outer(2 * tau, b2)
        qdd = np.where((tau < self.t_e)[:, None], 2 * b2, 0.0)
        return q, qd, qdd

    def sample_times(self, dt: float) -> np.ndarray:
        k = int(math.ceil(self.t_e / dt - 1e-9))
        return np.arange(k + 1) * dt


def _ref_index(traj: JointTrajectory, t_now: float, budget: TimingBudget) -> int:
    return traj.index_at(t_now + budget.t_calc)


def plan_stop(traj: JointTrajectory, t_now: float, budget: TimingBudget) -> StopPlan:
    """Braking plan from the earliest sample at or after ``t_now + t_calc``.

    Past the end of ``traj`` the plan is empty (``t_e == 0``) at the final pose.
    """
    i = _ref_index(traj, t_now, budget)
    n = traj.q.shape[1]
    if i >= len(traj):
        q_end = traj.q[-1]
        return StopPlan(traj.t_end, q_end, np.zeros(n), 0.0, np.column_stack([q_end, np.zeros((n, 2))]),
                        len(traj), float(traj.s[-1]))
    q_ref, qd_ref = traj.q[i], traj.qd[i]
    t_e = float(np.max(stop_time_per_joint(qd_ref, traj.accel_min, traj.accel_max)))
    b2 = -qd_ref / (2 * t_e) if t_e > 0 else np.zeros(n)
    return StopPlan(float(traj.t[i]), q_ref.copy(), qd_ref.copy(), t_e,
                    np.column_stack([q_ref, qd_ref, b2]), i, float(traj.s[i]))


def _locate_all(path, q: np.ndarray, s_start: float) -> np.ndarray:
    s = np.empty(len(q))
    hint = s_start
    for k in range(len(q)):
        hint = s[k] = path.locate(q[k], hint)
    return s


def apply_stop(traj: JointTrajectory, t_now: float, budget: TimingBudget) -> JointTrajectory:
    """Executed trajectory after a stop request at ``t_now``: unchanged prefix plus braking."""
    plan = plan_stop(traj, t_now, budget)
    if plan.index >= len(traj):
        return traj
    taus = plan.sample_times(traj.dt)
    q, qd, qdd = plan.evaluate(taus)
    s = _locate_all(traj.path, q, plan.s_ref) if traj.path is not None else np.full(len(q), plan.s_ref)
    ramp = dict(t=plan.t_ref + taus, q=q, qd=qd, qdd=qdd, s=s)
    return traj._build([traj._select(slice(0, plan.index)), ramp])


# ----------------------------------------------------------------- re-timing


def _locked(traj: JointTrajectory, t0: float, s0: float, lead: float, scale: float) -> dict:
    """Samples following the nominal path uniformly time-scaled by ``scale``.

    The first sample is at ``t0`` and path time ``s0`` advanced by ``lead`` seconds.
    """
    path = traj.path
    # piecewise-linear map elapsed time -> path time
    bounds = [b for b in path.starts if b > s0 + _EPS_T]
    e_pts, s_pts = [0.0], [s0]
    s_cur, e_cur = s0, 0.0
    for b in bounds:
        e_cur += (b - s_cur) / path.rate(s_cur, scale)
        s_cur = b
        e_pts.append(e_cur)
        s_pts.append(b)
    total = e_pts[-1]
    k_max = int(math.ceil((total - lead) / traj.dt - 1e-9)) if total > lead else 0
    e = np.minimum(lead + traj.dt * np.arange(k_max + 1), total)
    s = np.interp(e, e_pts, s_pts)
    q, dq, ddq = path.evaluate(s)
    dwell = path.is_dwell(s)
    rate = np.where(dwell, 1.0, scale)[:, None]
    qd, qdd = dq * rate, ddq * rate**2
    qd[-1] = 0.0 if s[-1] >= path.duration - _EPS_T else qd[-1]
    qdd[-1] = 0.0 if s[-1] >= path.duration - _EPS_T else qdd[-1]
    return dict(t=t0 + traj.dt * np.arange(k_max + 1), q=q, qd=qd, qdd=qdd, s=s)


def _target_speed(path, s: float, scale: float) -> float:
    if bool(path.is_dwell(s)):
        return 0.0
    _, dq, _ = path.evaluate(s)
    return scale * float(np.linalg.norm(dq[0]))


def _accel_along(direction: np.ndarray, accel_min: np.ndarray, accel_max: np.ndarray) -> float:
    lim = np.where(direction > 0, accel_max, -accel_min)
    mask = np.abs(direction) > 1e-12
    return float(np.min(lim[mask] / np.abs(direction[mask])))


def _retime(traj: JointTrajectory, t_now: float, budget: TimingBudget, scale: float) -> JointTrajectory:
    if traj.path is None:
        return traj
    i = _ref_index(traj, t_now, budget)
    if i >= len(traj):
        if traj.finished:
            return traj
        traj = traj.hold_until(t_now + budget.t_calc)
        i = _ref_index(traj, t_now, budget)
    path = traj.path
    t_ref, q_ref, qd_ref, s_ref = float(traj.t[i]), traj.q[i], traj.qd[i], float(traj.s[i])
    prefix = traj._select(slice(0, i))
    w0 = float(np.linalg.norm(qd_ref))
    gap = w0 - _target_speed(path, s_ref, scale)
    if abs(gap) <= 1e-9 * (1.0 + w0):
        return traj._build([prefix, _locked(traj, t_ref, s_ref, 0.0, scale)])

    if gap > 0:
        plan = plan_stop(traj, t_now, budget)

        def ramp(tau):
            return plan.evaluate(tau)

        horizon = plan.t_e
    else:
        d = qd_ref / w0 if w0 > 0 else path.direction(s_ref)
        a_vec = _accel_along(d, traj.accel_min, traj.accel_max) * d

        def ramp(tau):
            tau = np.atleast_1d(np.asarray(tau, dtype=float))
            q = q_ref + np.outer(tau, qd_ref) + 0.5 * np.outer(tau**2, a_vec)
            return q, qd_ref + np.outer(tau, a_vec), np.repeat(a_vec[None, :], tau.size, axis=0)

        horizon = math.inf
    sign = 1.0 if gap > 0 else -1.0
    s_hint = s_ref

    def crossing(tau: float) -> float:
        q, qd, _ = ramp(tau)
        s = path.locate(q[0], s_hint)
        return sign * (float(np.linalg.norm(qd[0])) - _target_speed(path, s, scale))

    ts, qs, qds, qdds, ss = [], [], [], [], []
    k = 0
    while True:
        tau = k * traj.dt
        f = crossing(min(tau, horizon)) if k > 0 else sign * gap
        if f <= 0:
            lo = (k - 1) * traj.dt
            tau_star = brentq(crossing, lo, min(tau, horizon), xtol=1e-12) if f < 0 else min(tau, horizon)
            q_star = ramp(tau_star)[0][0]
            s_star = path.locate(q_star, s_hint)
            locked = _locked(traj, t_ref + tau, s_star, tau - tau_star, scale)
            break
        q, qd, qdd = ramp(tau)
        s_hint = path.locate(q[0], s_hint)
        ts.append(t_ref + tau)
        qs.append(q[0])
        qds.append(qd[0])
        qdds.append(qdd[0])
        ss.append(s_hint)
        k += 1
        if s_hint >= path.duration - _EPS_T:
            locked = _locked(traj, t_ref + k * traj.dt, path.duration, 0.0, scale)
            break
    n = traj.q.shape[1]
    ramp_part = dict(t=np.array(ts), q=np.array(qs).reshape(-1, n), qd=np.array(qds).reshape(-1, n),
                     qdd=np.array(qdds).reshape(-1, n), s=np.array(ss))
    return traj._build([prefix, ramp_part, locked])


def plan_reduce_speed(traj: JointTrajectory, t_now: float, speed_scale: float,
                      budget: TimingBudget) -> JointTrajectory:
    """Brake linearly until the uniformly time-scaled path is met, then stitch onto it."""
    if not 0.0 < speed_scale < 1.0:
        raise ValueError(f"speed_scale must lie in (0, 1), got {speed_scale}")
    return _retime(traj, t_now, budget, speed_scale)


def plan_resume(traj: JointTrajectory, t_now: float, budget: TimingBudget,
                speed_scale: float = 1.0) -> JointTrajectory:
    """Accelerate linearly back onto the path at ``speed_scale`` (full speed by default)."""
    if not 0.0 < speed_scale <= 1.0:
        raise ValueError(f"speed_scale must lie in (0, 1], got {speed_scale}")
    return _retime(traj, t_now, budget, speed_scale)


# ------------------------------------------------------------------ nominal task


def _ee_gain(model: RobotModel, seg: MotionSegment, n_grid: int = 201) -> tuple[np.ndarray, np.ndarray]:
    """EE speed per unit arc-length speed along ``seg`` on a grid of ``u``."""
    u = np.linspace(0.0, seg.length, n_grid)
    h = 1e-6
    q = seg.q0 + np.outer(u, seg.direction)
    fwd = forward_keypoints(model, q + h * seg.direction, check=False)[:, 0]
    bwd = forward_keypoints(model, q - h * seg.direction, check=False)[:, 0]
    return u, np.linalg.norm(fwd - bwd, axis=1) / (2 * h)


def _peak_ee_speed(seg: MotionSegment, u: np.ndarray, gain: np.ndarray) -> float:
    prof = np.minimum(seg.peak, np.sqrt(2 * seg.accel * np.minimum(u, seg.length - u).clip(0)))
    return float(np.max(prof * gain))


def plan_pick_and_place(model: RobotModel, waypoints, vel_limits=None, *, accel_limits=None,
                        ee_speed: float | None = 1.0, dwell=0.0, dt: float = 0.005,
                        t0: float = 0.0) -> JointTrajectory:
    """Point-to-point trajectory through ``waypoints`` with synchronised trapezoids.

    Each move is straight in joint space and starts and ends at rest. The cruise
    speed is the largest one respecting the joint limits and, when ``ee_speed`` is
    given, keeping the Cartesian EE speed at or below it (the cap is met exactly
    on moves where it binds). ``dwell`` is a scalar applied at every intermediate
    waypoint or a sequence with one entry per waypoint.
    """
    wps = [np.asarray(w, dtype=float) for w in waypoints]
    if not wps:
        raise ValueError("at least one waypoint is required")
    for w in wps:
        try:
            model.check_limits(w)
        except JointLimitError as exc:
            raise JointLimitError(f"unreachable waypoint: {exc}") from None
    vel = np.asarray(model.vel_limit if vel_limits is None else vel_limits, dtype=float) * np.ones(model.n_joints)
    vel = np.minimum(vel, model.vel_limit)
    acc_default = np.minimum(-model.accel_min, model.accel_max)
    acc = np.asarray(acc_default if accel_limits is None else accel_limits, dtype=float) * np.ones(model.n_joints)
    acc = np.minimum(acc, acc_default)
    if np.isscalar(dwell):
        dwells = [0.0] + [float(dwell)] * max(len(wps) - 2, 0) + ([0.0] if len(wps) > 1 else [])
    else:
        dwells = [float(x) for x in dwell]
        if len(dwells) != len(wps):
            raise ValueError("dwell sequence must match the number of waypoints")

    segments: list[MotionSegment | Dwell] = []
    for k, w in enumerate(wps):
        if k > 0 and np.linalg.norm(w - wps[k - 1]) > 1e-12:
            d = (w - wps[k - 1]) / np.linalg.norm(w - wps[k - 1])
            moving = np.abs(d) > 1e-12
            v_max = float(np.min(vel[moving] / np.abs(d[moving])))
            a_max = float(np.min(acc[moving] / np.abs(d[moving])))
            seg = MotionSegment(wps[k - 1], w, v_max, a_max)
            if ee_speed is not None:
                u, gain = _ee_gain(model, seg)
                if _peak_ee_speed(seg, u, gain) > ee_speed:
                    lo, hi = 0.0, v_max
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        trial = MotionSegment(wps[k - 1], w, mid, a_max)
                        lo, hi = (mid, hi) if _peak_ee_speed(trial, u, gain) <= ee_speed else (lo, mid)
                    seg = MotionSegment(wps[k - 1], w, lo, a_max)
            segments.append(seg)
        if dwells[k] > 0:
            segments.append(Dwell(w.copy(), dwells[k]))

    n = model.n_joints
    if not segments:
        return JointTrajectory(t=[t0], q=wps[0][None, :], qd=np.zeros((1, n)), qdd=np.zeros((1, n)),
                               vel_limit=model.vel_limit, accel_min=model.accel_min,
                               accel_max=model.accel_max, dt=dt, s=np.zeros(1), path=None)
    path = TaskPath(segments)
    stub = JointTrajectory(t=[t0], q=wps[0][None, :], qd=np.zeros((1, n)), qdd=np.zeros((1, n)),
                           vel_limit=model.vel_limit, accel_min=model.accel_min, accel_max=model.accel_max,
                           dt=dt, s=np.zeros(1), path=path)
    return stub._build([_locked(stub, t0, 0.0, 0.0, 1.0)])


def start_cycle(nominal: JointTrajectory, t0: float, speed_scale: float) -> JointTrajectory:
    """Fresh run of ``nominal``'s path from its start at ``t0``.

    ``speed_scale`` 0 gives a single stationary sample that a later resume can pick up.
    """
    n = nominal.q.shape[1]
    stub = JointTrajectory(t=[t0], q=nominal.q[:1], qd=np.zeros((1, n)), qdd=np.zeros((1, n)),
                           vel_limit=nominal.vel_limit, accel_min=nominal.accel_min,
                           accel_max=nominal.accel_max, dt=nominal.dt, s=np.zeros(1), path=nominal.path)
    if speed_scale <= 0 or nominal.path is None:
        return stub
    return stub._build([_locked(stub, t0, 0.0, 0.0, speed_scale)])
