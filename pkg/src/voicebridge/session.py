"""Session state machine gating voice commands and expanding them to actions.

Modes are Standby (idle, only "hey robot" does anything), Active (motion
commands allowed), and Halted (emergency-stopped; an explicit "hey robot"
re-arms). "stop" always wins: it halts motion and suppresses everything
until the operator re-arms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from voicebridge.lexicon import Command
from voicebridge.robot_core.kinematics import Pose

__all__ = [
    "SessionMode",
    "SessionConfig",
    "ActionKind",
    "RobotAction",
    "handle_command",
    "accumulate_pull",
    "SessionEngine",
]


class SessionMode(Enum):
    STANDBY = "standby"
    ACTIVE = "active"
    HALTED = "halted"


class ActionKind(Enum):
    REACH = "reach"
    GRASP = "grasp"
    OPEN_GRIPPER = "open_gripper"
    PULL = "pull"
    HALT = "halt"
    NOOP = "noop"


@dataclass(frozen=True)
class RobotAction:
    kind: ActionKind
    pose: Pose | None = None  # Reach target
    distance: float = 0.0  # signed Pull length (m)


@dataclass(frozen=True)
class SessionConfig:
    """Pulling direction/step and the grasp target for the tense sequence."""

    grasp_pose: Pose
    pull_axis: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, -1.0])
    )
    pull_step: float = 0.005

    def __post_init__(self) -> None:
        axis = np.asarray(self.pull_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError("pull_axis must be a unit vector")
        object.__setattr__(self, "pull_axis", axis)
        if self.pull_step <= 0:
            raise ValueError("pull_step must be > 0")


def handle_command(
    mode: SessionMode, cmd: Command, cfg: SessionConfig
) -> tuple[SessionMode, list[RobotAction]]:
    """Pure transition function: (mode, command) -> (new mode, actions).

    Standby ignores everything but "hey robot"; Halted additionally lets
    "terminate" stand down without motion. Active expands the motion
    commands, with "stop" halting into Halted and "terminate" halting,
    releasing, and returning to Standby.
    """
    if mode is SessionMode.STANDBY:
        if cmd is Command.HEY_ROBOT:
            return SessionMode.ACTIVE, []
        return SessionMode.STANDBY, []

    if mode is SessionMode.HALTED:
        if cmd is Command.HEY_ROBOT:
            return SessionMode.ACTIVE, []
        if cmd is Command.TERMINATE:
            return SessionMode.STANDBY, []
        return SessionMode.HALTED, []

    # Active
    if cmd is Command.HEY_ROBOT:
        return SessionMode.ACTIVE, []
    if cmd is Command.TENSE:
        return SessionMode.ACTIVE, [
            RobotAction(ActionKind.REACH, pose=cfg.grasp_pose),
            RobotAction(ActionKind.GRASP),
            RobotAction(ActionKind.PULL, distance=cfg.pull_step),
        ]
    if cmd is Command.RELEASE:
        return SessionMode.ACTIVE, [RobotAction(ActionKind.OPEN_GRIPPER)]
    if cmd is Command.PULL_MORE:
        return SessionMode.ACTIVE, [RobotAction(ActionKind.PULL, distance=cfg.pull_step)]
    if cmd is Command.PULL_LESS:
        return SessionMode.ACTIVE, [
            RobotAction(ActionKind.PULL, distance=-cfg.pull_step)
        ]
    if cmd is Command.STOP:
        return SessionMode.HALTED, [RobotAction(ActionKind.HALT)]
    # Terminate
    return SessionMode.STANDBY, [
        RobotAction(ActionKind.HALT),
        RobotAction(ActionKind.OPEN_GRIPPER),
    ]


def accumulate_pull(current_displacement: float, action: RobotAction) -> float:
    """Apply a Pull to the running displacement, clamped at the grasp point."""
    if action.kind is not ActionKind.PULL:
        raise ValueError("accumulate_pull expects a Pull action")
    if current_displacement < 0:
        raise ValueError("displacement cannot be negative")
    return max(0.0, current_displacement + action.distance)


class SessionEngine:
    """Serial command processor holding the authoritative session mode."""

    def __init__(self, cfg: SessionConfig, mode: SessionMode = SessionMode.STANDBY):
        self.cfg = cfg
        self.mode = mode

    def apply(self, cmd: Command) -> list[RobotAction]:
        self.mode, actions = handle_command(self.mode, cmd, self.cfg)
        return actions
