"""Fixed-tick scenario simulation and benchmark comparison."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import CompensationTable
from .monitor import (MOVING_ROBOT_KEYPOINTS, Command, KeypointTracker, Regime, RegimeState, ScenarioPolicy,
                      command_for, evaluate)
from .operator_sim import (CONFIDENCE_THRESHOLD, NoOperator, OperatorScript, ReplayOperator, ScriptSource,
                           filter_confidence, replay_stream)
from .robot import ROBOT_KEYPOINTS, RobotModel, forward_keypoints
from .trajectory import (JointTrajectory, TimingBudget, apply_stop, plan_reduce_speed, plan_resume,
                         start_cycle)

BASELINES = ("full", "reduced")
SCENARIOS = BASELINES + ("1", "2", "3", "4", "5")


class InvariantViolation(RuntimeError):
    """Raised by strict runs when a safety or limit invariant fails."""


@dataclass
class ScenarioSpec:
    """One simulation run.

    ``name`` is ``"full"``, ``"reduced"`` or ``"1"``..``"5"``; the baselines run at a
    fixed regime and ignore ``policy``. ``operator`` is ``None`` (empty workspace),
    an :class:`OperatorScript`, a replay file path, or a template object with a
    ``fresh()`` method returning a new live source.
    """

    name: str
    robot: RobotModel
    nominal: JointTrajectory
    policy: ScenarioPolicy | None = None
    operator: object = None
    cycles: int = 20
    tick: float = 0.005
    budget: TimingBudget = field(default_factory=TimingBudget)
    compensation: CompensationTable = field(default_factory=CompensationTable.default)
    reduced_scale: float = 0.42
    confidence: float = CONFIDENCE_THRESHOLD
    t_hold: float = 0.2
    v_h: float = 1.6
    max_time: float = 3600.0

    def __post_init__(self):
        self.name = str(self.name)
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.tick <= 0:
            raise ValueError("tick must be positive")
        if abs(self.nominal.dt - self.tick) > 1e-12:
            raise ValueError("nominal trajectory must be sampled on the simulation tick")
        if self.name not in BASELINES and self.policy is None:
            raise ValueError(f"scenario {self.name} needs a monitoring policy")
        if not 0 < self.reduced_scale < 1:
            raise ValueError("reduced_scale must lie in (0, 1)")

    @property
    def monitored(self) -> tuple:
        return tuple(self.policy.monitored_robot_kps) if self.policy is not None else MOVING_ROBOT_KEYPOINTS


@dataclass(frozen=True)
class TraceRecord:
    t: float
    regime: Regime
    speed_scale: float
    min_pair_dist: float
    human_kp: str
    robot_kp: str
    ee_speed: float
    q: np.ndarray
    qd: np.ndarray


@dataclass
class Trace:
    """Column store of one record per tick."""

    t: np.ndarray
    regime: np.ndarray
    speed_scale: np.ndarray
    min_pair_dist: np.ndarray
    human_kp: list
    robot_kp: list
    ee_speed: np.ndarray
    q: np.ndarray
    qd: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, k: int) -> TraceRecord:
        return TraceRecord(float(self.t[k]), Regime(int(self.regime[k])), float(self.speed_scale[k]),
                           float(self.min_pair_dist[k]), self.human_kp[k], self.robot_kp[k],
                           float(self.ee_speed[k]), self.q[k], self.qd[k])

    def to_csv(self, path=None) -> str:
        n = self.q.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "regime", "speed_scale", "min_pair_dist", "human_kp", "robot_kp", "ee_speed"]
                   + [f"q{j + 1}" for j in range(n)] + [f"qd{j + 1}" for j in range(n)])
        for k in range(len(self)):
            d = self.min_pair_dist[k]
            w.writerow([f"{self.t[k]:.6f}", Regime(int(self.regime[k])).name, f"{self.speed_scale[k]:.2f}",
                        "" if np.isinf(d) else f"{d:.6f}", self.human_kp[k], self.robot_kp[k],
                        f"{self.ee_speed[k]:.6f}"]
                       + [f"{x:.9f}" for x in self.q[k]] + [f"{x:.9f}" for x in self.qd[k]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


@dataclass
class BenchmarkResult:
    scenario: str
    total_duration: float
    cycle_durations: list
    transitions: dict
    violations: list = field(default_factory=list)
    completed: bool = True

    @property
    def n_transitions(self) -> int:
        return sum(self.transitions.values())


def _make_source(operator):
    if operator is None:
        return NoOperator()
    if isinstance(operator, OperatorScript):
        return ScriptSource(operator)
    if isinstance(operator, (str, Path)):
        return ReplayOperator(replay_stream(operator))
    if hasattr(operator, "fresh"):
        return operator.fresh()
    raise TypeError(f"unsupported operator description {type(operator).__name__}")


def _ee_speeds(model: RobotModel, q: np.ndarray, qd: np.ndarray, h: float = 1e-3) -> np.ndarray:
    fwd = forward_keypoints(model, q + 0.5 * h * qd, check=False)[:, 0]
    bwd = forward_keypoints(model, q - 0.5 * h * qd, check=False)[:, 0]
    return np.linalg.norm(fwd - bwd, axis=1) / h


class _Sampler:
    """Reads an executed trajectory tick by tick; past its end the last pose is held.

    Keypoints of the samples still ahead are computed in one batch.
    """

    def __init__(self, model: RobotModel, traj: JointTrajectory, t_from: float):
        self.traj = traj
        self.k0 = self.k = traj.index_at(t_from)
        self.kps = forward_keypoints(model, traj.q[self.k0:], check=False)
        self.kps_end = forward_keypoints(model, traj.q[-1], check=False)
        self.moving = (np.abs(traj.qd) > 1e-12).any(axis=1).tolist()

    def at(self, t: float):
        tr = self.traj
        while self.k < len(tr) and tr.t[self.k] < t - 1e-9:
            self.k += 1
        if self.k < len(tr) and abs(tr.t[self.k] - t) <= 1e-9:
            return tr.q[self.k], tr.qd[self.k], self.kps[self.k - self.k0], self.moving[self.k]
        return tr.q[-1], np.zeros_like(tr.qd[-1]), self.kps_end, False


def run_scenario(spec: ScenarioSpec, strict: bool = False) -> tuple[BenchmarkResult, Trace]:
    """Simulate ``spec.cycles`` task cycles on a fixed tick.

    Every tick the operator stream is read and confidence-filtered, missing
    keypoints are held or inflated, pairwise distances to the robot keypoints of the
    executed trajectory feed the regime monitor, and a regime change re-plans the
    trajectory (stop, reduce or resume; the change takes effect after ``t_calc``).
    A new cycle starts on the tick where the previous one reaches its final pose.
    """
    model, tick = spec.robot, spec.tick
    source = _make_source(spec.operator)
    tracker = KeypointTracker(spec.t_hold, spec.v_h)
    labels = list(ROBOT_KEYPOINTS)
    monitored = spec.monitored
    mon_idx = [labels.index(r) for r in monitored]
    pair_keys: dict = {}
    h_comps: dict = {}
    moving = [labels.index(r) for r in MOVING_ROBOT_KEYPOINTS]
    r_comp = np.array([spec.compensation.r(r) for r in MOVING_ROBOT_KEYPOINTS])
    fixed = {"full": Regime.FULL, "reduced": Regime.REDUCED}.get(spec.name)
    state = RegimeState(fixed if fixed is not None else Regime.FULL)
    if fixed is Regime.REDUCED:
        state = RegimeState(Regime.REDUCED, None, None)

    def scale_of(st: RegimeState) -> float:
        return command_for(st, spec.reduced_scale).speed_scale

    if np.any(np.abs(spec.nominal.qd) > model.vel_limit * (1 + 1e-9)):
        violations_init = ["nominal trajectory exceeds joint velocity limits"]
    else:
        violations_init = []
    traj = start_cycle(spec.nominal, 0.0, scale_of(state))
    sampler = _Sampler(model, traj, 0.0)
    source.on_cycle_start(0.0)
    cycle_start, cycles, done = 0.0, [], False
    transitions: dict = {}
    violations: list = violations_init
    rows_t, rows_reg, rows_scale, rows_d, rows_h, rows_r, rows_q, rows_qd = ([] for _ in range(8))
    n_ticks_max = int(round(spec.max_time / tick))

    for k in range(n_ticks_max + 1):
        t = round(k * tick, 9)
        if t >= traj.t_end - 1e-9 and traj.finished:
            cycles.append(round(t - cycle_start, 9))
            if len(cycles) == spec.cycles:
                done = True
            else:
                cycle_start = t
                traj = start_cycle(spec.nominal, t, scale_of(state))
                sampler = _Sampler(model, traj, t)
                source.on_cycle_start(t)
        q, qd, kps, moving_now = sampler.at(t)

        frame = filter_confidence(source.frame_at(t, kps), spec.confidence)
        seen, inflation = tracker.update(frame.positions(), t)
        if seen:
            h_labels = tuple(seen)
            if h_labels not in pair_keys:
                pair_keys[h_labels] = [(h, r) for h in h_labels for r in monitored]
            H = np.array([seen[h] for h in h_labels])
            diff = H[:, None] - kps[mon_idx][None]
            D = np.sqrt((diff * diff).sum(axis=-1))
            D -= np.array([inflation[h] for h in h_labels])[:, None]
            flat = D.ravel()
            dist = dict(zip(pair_keys[h_labels], flat.tolist()))
            j = int(np.argmin(flat))
            d_min, (h_kp, r_kp) = float(flat[j]), pair_keys[h_labels][j]
        else:
            dist, d_min, h_kp, r_kp = {}, np.inf, "", ""

        if fixed is None and not done:
            new = evaluate(spec.policy, dist, state, t)
            if new.regime != state.regime:
                key = f"{state.regime.name}->{new.regime.name}"
                transitions[key] = transitions.get(key, 0) + 1
                cmd = command_for(new, spec.reduced_scale)
                if cmd.kind is Command.STOP:
                    traj = apply_stop(traj, t, spec.budget)
                elif new.regime < state.regime:
                    traj = plan_resume(traj, t, spec.budget, cmd.speed_scale)
                else:
                    traj = plan_reduce_speed(traj, t, cmd.speed_scale, spec.budget)
                sampler = _Sampler(model, traj, t)
                if np.any(np.abs(traj.qd) > model.vel_limit * (1 + 1e-9)):
                    violations.append(f"t={t:.3f}: re-planned trajectory exceeds joint velocity limits")
            state = new

        if fixed is None and moving_now:
            truth = source.truth_at(t, kps)
            if truth:
                h_labels = tuple(truth)
                if h_labels not in h_comps:
                    h_comps[h_labels] = np.array([spec.compensation.h(h) for h in h_labels])
                H = np.array([truth[h] for h in h_labels])
                h_comp = h_comps[h_labels]
                gap = (np.linalg.norm(H[:, None] - kps[moving][None], axis=-1)
                       - h_comp[:, None] - r_comp[None, :])
                if gap.min() <= 0:
                    i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
                    violations.append(f"t={t:.3f}: contact {h_labels[i]}-{MOVING_ROBOT_KEYPOINTS[j]} "
                                      f"gap {gap[i, j]:.4f} m while moving")

        rows_t.append(t)
        rows_reg.append(int(state.regime))
        rows_scale.append(scale_of(state))
        rows_d.append(d_min)
        rows_h.append(h_kp)
        rows_r.append(r_kp)
        rows_q.append(q)
        rows_qd.append(qd)
        if done:
            break
    completed = done

    q_arr, qd_arr = np.array(rows_q), np.array(rows_qd)
    trace = Trace(np.array(rows_t), np.array(rows_reg), np.array(rows_scale), np.array(rows_d),
                  rows_h, rows_r, _ee_speeds(model, q_arr, qd_arr), q_arr, qd_arr)
    result = BenchmarkResult(spec.name, round(float(sum(cycles)), 9), cycles, transitions, violations, completed)
    if strict and violations:
        raise InvariantViolation(violations[0])
    return result, trace


@dataclass
class ComparisonRow:
    scenario: str
    duration: float
    transitions: int
    violations: int


@dataclass
class Comparison:
    rows: list
    checks: dict

    @property
    def durations(self) -> dict:
        return {r.scenario: r.duration for r in self.rows}

    @property
    def ordering_ok(self) -> bool:
        return all(self.checks.values())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "duration_s", "transitions", "violations"])
        for r in self.rows:
            w.writerow([r.scenario, f"{r.duration:.3f}", r.transitions, r.violations])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def ordering_checks(d: dict) -> dict:
    """Benchmark ordering targets evaluated on whichever scenarios are present."""
    checks = {}

    def add(name, *keys, test):
        if all(k in d for k in keys):
            checks[name] = bool(test(*(d[k] for k in keys)))

    add("full < sc5", "full", "5", test=lambda a, b: a < b)
    add("sc5 <= sc4", "5", "4", test=lambda a, b: a <= b)
    add("sc4 < sc1", "4", "1", test=lambda a, b: a < b)
    add("sc4 < sc3", "4", "3", test=lambda a, b: a < b)
    add("sc5 < reduced", "5", "reduced", test=lambda a, b: a < b)
    return checks


def compare_scenarios(specs, results=None) -> tuple[Comparison, dict]:
    """Run every spec (they must share operator and cycle count) and tabulate them."""
    specs = list(specs)
    if not specs:
        raise ValueError("nothing to compare")
    ref = specs[0]
    for s in specs[1:]:
        if s.cycles != ref.cycles:
            raise ValueError("specs differ in cycle count")
        if s.operator != ref.operator:
            raise ValueError("specs differ in operator script")
    results = {} if results is None else results
    rows = []
    for s in specs:
        res, _ = run_scenario(s)
        results[s.name] = res
        rows.append(ComparisonRow(s.name, res.total_duration, res.n_transitions, len(res.violations)))
    rows.sort(key=lambda r: (r.duration, r.scenario))
    return Comparison(rows, ordering_checks({r.scenario: r.duration for r in rows})), results
