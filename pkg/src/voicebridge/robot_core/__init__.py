"""Kinematic model, constrained IK, trajectories, and simulated execution."""

from voicebridge.robot_core.kinematics import (
    JointLimitError,
    JointSpec,
    KinematicChain,
    Pose,
    RcmConstraint,
    forward_kinematics,
    load_chain,
    rcm_error,
)
from voicebridge.robot_core.ik import NotReachableError, solve_constrained_ik
from voicebridge.robot_core.trajectory import MotionLimits, Trajectory, plan_trajectory
from voicebridge.robot_core.simulator import (
    RobotSimulator,
    RobotState,
    Scenario,
    load_scenario,
)
from voicebridge.robot_core.controller import RobotController

__all__ = [
    "JointLimitError",
    "JointSpec",
    "KinematicChain",
    "Pose",
    "RcmConstraint",
    "forward_kinematics",
    "load_chain",
    "rcm_error",
    "NotReachableError",
    "solve_constrained_ik",
    "MotionLimits",
    "Trajectory",
    "plan_trajectory",
    "RobotSimulator",
    "RobotState",
    "Scenario",
    "load_scenario",
    "RobotController",
]
