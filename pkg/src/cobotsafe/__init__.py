"""Keypoint-based speed-and-separation and power-and-force-limiting safety simulator."""
from .geometry import (BaseDistances, CompensationTable, PflParams, SeparationParams, build_separation_matrix,
                       pfl_max_relative_speed, pfl_reduced_mass, protective_separation_distance)
from .monitor import Regime, RegimeState, ScenarioPolicy, command_for, evaluate, scenario_policy
from .robot import RobotModel, forward_keypoints
from .trajectory import JointTrajectory, TimingBudget, apply_stop, plan_pick_and_place, plan_stop

__all__ = [
    "BaseDistances", "CompensationTable", "PflParams", "SeparationParams", "build_separation_matrix",
    "pfl_max_relative_speed", "pfl_reduced_mass", "protective_separation_distance",
    "Regime", "RegimeState", "ScenarioPolicy", "command_for", "evaluate", "scenario_policy",
    "RobotModel", "forward_keypoints",
    "JointTrajectory", "TimingBudget", "apply_stop", "plan_pick_and_place", "plan_stop",
]
