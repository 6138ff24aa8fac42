"""YAML configuration: parsing, validation and construction of simulation objects."""
from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .geometry import BaseDistances, CompensationTable, PflParams, SeparationParams
from .harness import BASELINES, SCENARIOS, ScenarioSpec
from .monitor import scenario_policy
from .operator_sim import CyclicVisits, OperatorScript
from .robot import RobotModel
from .trajectory import JointTrajectory, TimingBudget, plan_pick_and_place

_AXES = {"x": [1.0, 0.0, 0.0], "y": [0.0, 1.0, 0.0], "z": [0.0, 0.0, 1.0]}


class ConfigError(ValueError):
    """Inconsistent or malformed configuration."""


def default_config() -> dict:
    text = resources.files("cobotsafe").joinpath("data/default.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None) -> dict:
    """Defaults overlaid with the YAML file at ``path`` (nested sections merge)."""
    cfg = default_config()
    if path is None:
        return cfg
    path = Path(path)
    try:
        user = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    op = user.get("operator")
    cfg = _merge(cfg, user)
    if isinstance(op, dict) and op.get("kind", "cyclic") != "cyclic":
        # another operator kind shares no settings with the default one
        cfg["operator"] = copy.deepcopy(op)
    cfg["_dir"] = str(path.parent)
    return cfg


@dataclass
class Setup:
    """Everything a scenario run needs, built once from a config mapping."""

    cfg: dict
    robot: RobotModel
    nominal: JointTrajectory
    budget: TimingBudget
    separation: SeparationParams
    base: BaseDistances
    pfl: PflParams
    compensation: CompensationTable
    operator: object

    @property
    def reduced_scale(self) -> float:
        return self.cfg["speeds"]["reduced"] / self.cfg["speeds"]["full"]

    def policy(self, scenario):
        mon = self.cfg["monitor"]
        try:
            return scenario_policy(int(scenario), self.base, self.compensation, self.robot.reach,
                                   t_clear=mon["t_clear"], hysteresis=mon["hysteresis"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"scenario {scenario}: {exc}") from None

    def spec(self, scenario, *, cycles: int | None = None, operator=None, seed: int | None = None) -> ScenarioSpec:
        name = str(scenario)
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
        op = self.operator if operator is None else operator
        if seed is not None and hasattr(op, "seed"):
            op = replace(op, seed=seed)
        mon = self.cfg["monitor"]
        try:
            return ScenarioSpec(
                name=name, robot=self.robot, nominal=self.nominal,
                policy=None if name in BASELINES else self.policy(name), operator=op,
                cycles=int(self.cfg["cycles"] if cycles is None else cycles), tick=self.budget.dt,
                budget=self.budget, compensation=self.compensation, reduced_scale=self.reduced_scale,
                confidence=mon["confidence"], t_hold=mon["t_hold"], v_h=self.separation.v_h)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name)
    if not isinstance(sec, dict):
        raise ConfigError(f"missing section '{name}'")
    return sec


def _robot(cfg: dict) -> RobotModel:
    r = _section(cfg, "robot")
    axes = [_AXES.get(a, a) if isinstance(a, str) else a for a in r["joint_axes"]]
    if any(isinstance(a, str) for a in axes):
        raise ConfigError("robot.joint_axes entries must be x, y, z or 3-vectors")
    decel = float(r["decel"])
    n = len(axes)
    return RobotModel(
        link_offsets=[[0.0, 0.0, float(x)] for x in r["link_lengths"]],
        joint_axes=np.asarray(axes, dtype=float),
        joint_limits=[[-np.deg2rad(a), np.deg2rad(a)] for a in r["joint_limits_deg"]],
        vel_limit=np.deg2rad(np.asarray(r["vel_limits_deg"], dtype=float)),
        accel_min=[-decel] * n, accel_max=[decel] * n, reach=float(r["reach"]))


def _operator(cfg: dict, seed: int):
    op = dict(cfg.get("operator") or {"kind": "none"})
    kind = op.pop("kind", "none")
    if kind == "none":
        return None
    if kind == "cyclic":
        for key in ("standby", "work", "facing"):
            if key in op:
                op[key] = tuple(float(x) for x in op[key])
        return CyclicVisits(seed=seed, **op)
    if kind == "script":
        waypoints = tuple((float(w[0]), tuple(float(x) for x in w[1:4])) for w in op.pop("waypoints"))
        reach = tuple((float(a), float(b)) for a, b in op.pop("reach", ()))
        facing = tuple(op.pop("facing", (0.0, 0.0)))
        return OperatorScript(waypoints, reach=reach, facing=facing, seed=seed, **op)
    if kind == "replay":
        return str(Path(cfg.get("_dir", ".")) / op["path"])
    raise ConfigError(f"unknown operator kind {kind!r}")


def build_setup(cfg: dict) -> Setup:
    """Validate ``cfg`` and construct the robot, nominal task and safety parameters."""
    try:
        robot = _robot(cfg)
        timing = _section(cfg, "timing")
        budget = TimingBudget(t_calc=float(timing["t_calc"]), t_r=float(timing["t_r"]), dt=float(cfg["tick"]))
        separation = SeparationParams(**_section(cfg, "separation"))
        bd = dict(_section(cfg, "base_distances"))
        mode = bd.pop("mode", "constants")
        speeds = _section(cfg, "speeds")
        if mode == "constants":
            base = BaseDistances(**bd)
        elif mode == "derived":
            base = BaseDistances.derived(separation, float(speeds["reduced"]))
        else:
            raise ConfigError(f"base_distances.mode must be 'constants' or 'derived', got {mode!r}")
        pfl = PflParams(**{k: float(v) for k, v in _section(cfg, "pfl").items()})
        comp_cfg = _section(cfg, "compensation")
        compensation = CompensationTable(robot=dict(comp_cfg["robot"]), human=dict(comp_cfg["human"]))
        missing = [k for k in robot.keypoint_labels if k not in compensation.robot]
        if missing:
            raise ConfigError(f"compensation.robot lacks {', '.join(missing)}")
        task = _section(cfg, "task")
        nominal = plan_pick_and_place(robot, task["waypoints"], task.get("joint_speed"),
                                      accel_limits=task.get("joint_accel"), ee_speed=float(speeds["full"]),
                                      dwell=task.get("dwell", 0.0), dt=budget.dt)
        operator = _operator(cfg, int(cfg.get("seed", 0)))
    except ConfigError:
        raise
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"missing or malformed config entry: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not 0 < speeds["reduced"] < speeds["full"]:
        raise ConfigError("speeds.reduced must lie between 0 and speeds.full")
    return Setup(cfg, robot, nominal, budget, separation, base, pfl, compensation, operator)
