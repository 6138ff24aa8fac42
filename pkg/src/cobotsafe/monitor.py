"""Safety regime state machine: immediate escalation, filtered de-escalation."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .geometry import (HEAD_KEYPOINTS, HUMAN_KEYPOINTS, BaseDistances, CompensationTable, SeparationMatrix,
                       build_separation_matrix)

MOVING_ROBOT_KEYPOINTS: tuple[str, ...] = ("EE", "J7", "J6", "J5", "J4", "J3")


class Regime(enum.IntEnum):
    FULL = 0
    REDUCED = 1
    STOPPED = 2


class DistanceSource(enum.Enum):
    BASE_ONLY = "base_only"
    MOVING_KEYPOINTS = "moving_keypoints"


class StopRule(enum.Enum):
    ANY_KEYPOINT = "any_keypoint"
    HEAD_ONLY = "head_only"


@dataclass(frozen=True)
class Trigger:
    human_kp: str
    robot_kp: str
    distance: float


@dataclass(frozen=True)
class RegimeState:
    regime: Regime = Regime.FULL
    trigger: Trigger | None = None
    clear_since: float | None = None


@dataclass(frozen=True)
class ScenarioPolicy:
    id: int
    distance_source: DistanceSource
    monitored_robot_kps: tuple
    stop_rule: StopRule
    thresholds: SeparationMatrix
    use_reduced: bool = True
    head_kps: tuple = HEAD_KEYPOINTS
    t_clear: float = 0.5
    hysteresis: float = 0.05

    def __post_init__(self):
        if self.stop_rule is StopRule.HEAD_ONLY and not self.head_kps:
            raise ValueError("HEAD_ONLY stop rule needs head keypoints")
        if self.stop_rule is StopRule.HEAD_ONLY and not self.use_reduced:
            raise ValueError("HEAD_ONLY stop rule needs a reduced-speed regime")
        if self.distance_source is DistanceSource.BASE_ONLY and tuple(self.monitored_robot_kps) != ("Base",):
            raise ValueError("BASE_ONLY policies monitor the Base keypoint only")
        missing = [(h, r) for r in self.monitored_robot_kps for h in HUMAN_KEYPOINTS
                   if (h, r) not in self.thresholds]
        if missing:
            raise ValueError(f"separation matrix lacks thresholds for {missing[0]}")
        if self.t_clear < 0 or self.hysteresis < 0:
            raise ValueError("filter constants must be non-negative")
        # flat per-pair arrays for the vectorised evaluation
        pairs = [p for p in self.thresholds.thresholds if p[1] in self.monitored_robot_kps]
        th = [self.thresholds[p] for p in pairs]
        object.__setattr__(self, "_pairs", pairs)
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(pairs)})
        object.__setattr__(self, "_lookup", {})  # key tuple of a distance map -> row indices
        object.__setattr__(self, "_table", np.array(
            [[x.stop_from_full, x.reduce, x.stop_from_reduced, p[0] in self.head_kps] for p, x in zip(pairs, th)],
            dtype=float).reshape(-1, 4))


def scenario_policy(scenario: int, base: BaseDistances, comp: CompensationTable, reach: float = 0.8,
                    t_clear: float = 0.5, hysteresis: float = 0.05) -> ScenarioPolicy:
    """Monitoring policy of scenarios 1-5.

    1: stop zone around the base (stop distance + reach + human sphere).
    2: reduce/stop zones around the base (base distances + reach + human sphere).
    3: stop-only keypoint pairs on the moving links. 4: reduce then stop on pairs.
    5: as 4, but only head keypoints can demand a stop.
    """
    filt = dict(t_clear=t_clear, hysteresis=hysteresis)
    if scenario in (1, 2):
        human_only = CompensationTable(robot={"Base": 0.0}, human=dict(comp.human))
        if scenario == 1:
            zones = BaseDistances(base.stop_from_full + reach, base.full_to_reduced, base.reduced_to_stop + reach)
        else:
            zones = BaseDistances(base.reduced_to_stop + reach, base.full_to_reduced, base.reduced_to_stop + reach)
        matrix = build_separation_matrix(zones, human_only, robots=("Base",))
        return ScenarioPolicy(scenario, DistanceSource.BASE_ONLY, ("Base",), StopRule.ANY_KEYPOINT, matrix,
                              use_reduced=scenario == 2, **filt)
    if scenario in (3, 4, 5):
        matrix = build_separation_matrix(base, comp, robots=MOVING_ROBOT_KEYPOINTS)
        rule = StopRule.HEAD_ONLY if scenario == 5 else StopRule.ANY_KEYPOINT
        return ScenarioPolicy(scenario, DistanceSource.MOVING_KEYPOINTS, MOVING_ROBOT_KEYPOINTS, rule, matrix,
                              use_reduced=scenario != 3, **filt)
    raise ValueError(f"unknown scenario {scenario!r}")


def _demand(policy: ScenarioPolicy, pair, d: float, current: Regime) -> Regime:
    th = policy.thresholds[pair]
    from_full = current is Regime.FULL or not policy.use_reduced
    if d < (th.stop_from_full if from_full else th.stop_from_reduced):
        if policy.stop_rule is StopRule.HEAD_ONLY and pair[0] not in policy.head_kps:
            return Regime.REDUCED
        return Regime.STOPPED
    if policy.use_reduced and d < th.reduce:
        return Regime.REDUCED
    return Regime.FULL


def _pair_arrays(policy: ScenarioPolicy, distances: dict):
    """Row indices into the policy table and distances of the monitored pairs."""
    keys = tuple(distances)
    hit = policy._lookup.get(keys)
    if hit is None:
        idx = np.array([policy._index.get(p, -1) for p in keys], dtype=int)
        hit = policy._lookup[keys] = (idx, bool((idx >= 0).all()))
    idx, complete = hit
    d = np.fromiter(distances.values(), dtype=float, count=len(keys))
    if not complete:
        d, idx = d[idx >= 0], idx[idx >= 0]
    return idx, d


def _strictest(policy: ScenarioPolicy, idx: np.ndarray, d: np.ndarray, current: Regime, margin: float = 0.0):
    """Most restrictive demand over all monitored pairs and the closest pair demanding it."""
    if idx.size == 0:
        return Regime.FULL, None
    table = policy._table[idx]
    dm = d - margin
    from_full = current is Regime.FULL or not policy.use_reduced
    stop = dm < table[:, 0 if from_full else 2]
    on_stop = 2 if policy.stop_rule is StopRule.ANY_KEYPOINT else np.where(table[:, 3] > 0, 2, 1)
    level = np.where(stop, on_stop, (dm < table[:, 1]) if policy.use_reduced else 0)
    top = int(level.max())
    if top == 0:
        return Regime.FULL, None
    cand = np.flatnonzero(level == top)
    j = cand[np.argmin(d[cand])]
    h, r = policy._pairs[idx[j]]
    return Regime(top), Trigger(h, r, float(d[j]))


def evaluate(policy: ScenarioPolicy, distances: dict, state: RegimeState, t_now: float) -> RegimeState:
    """Next regime given this tick's pairwise distances.

    A stricter demand takes effect on the same tick. Relaxing requires every pair
    to clear its threshold by ``policy.hysteresis`` for ``policy.t_clear`` seconds
    without interruption.
    """
    idx, d = _pair_arrays(policy, distances)
    target, trigger = _strictest(policy, idx, d, state.regime)
    if target > state.regime:
        return RegimeState(target, trigger, None)
    relaxed, relaxed_trigger = _strictest(policy, idx, d, state.regime, policy.hysteresis)
    if relaxed < state.regime:
        since = t_now if state.clear_since is None else state.clear_since
        if t_now - since >= policy.t_clear - 1e-9:
            return RegimeState(relaxed, relaxed_trigger, None)
        return RegimeState(state.regime, state.trigger, since)
    if target == state.regime and trigger is not None:
        return RegimeState(state.regime, trigger, None)
    return state if state.clear_since is None else RegimeState(state.regime, state.trigger, None)


class Command(enum.Enum):
    FULL_SPEED = "full"
    REDUCED_SPEED = "reduced"
    STOP = "stop"


@dataclass(frozen=True)
class SpeedCommand:
    kind: Command
    speed_scale: float


def command_for(state: RegimeState, reduced_scale: float = 0.42 / 1.0) -> SpeedCommand:
    if state.regime is Regime.FULL:
        return SpeedCommand(Command.FULL_SPEED, 1.0)
    if state.regime is Regime.REDUCED:
        return SpeedCommand(Command.REDUCED_SPEED, reduced_scale)
    return SpeedCommand(Command.STOP, 0.0)


@dataclass
class KeypointTracker:
    """Holds keypoints missing from a non-empty frame, then inflates their uncertainty.

    Within ``t_hold`` of the last detection a missing keypoint keeps its last
    position; afterwards its distances shrink by ``v_h`` times the time since it
    was last seen. An empty frame means no operator and clears the memory.
    """

    t_hold: float = 0.2
    v_h: float = 1.6
    _last: dict = field(default_factory=dict, repr=False)

    def update(self, positions: dict, t: float) -> tuple[dict, dict]:
        if not positions:
            self._last.clear()
            return {}, {}
        for label, p in positions.items():
            self._last[label] = (np.asarray(p, dtype=float), t)
        out, inflation = {}, {}
        for label, (p, seen) in self._last.items():
            out[label] = p
            elapsed = t - seen
            inflation[label] = self.v_h * elapsed if elapsed > self.t_hold + 1e-12 else 0.0
        return out, inflation
