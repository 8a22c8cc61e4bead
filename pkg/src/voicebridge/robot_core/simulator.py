"""Fixed-rate simulated execution of robot actions on the kinematic chain.

Reach and Pull solve the constrained IK along a finely subdivided Cartesian
path so the RCM stays inside tolerance over the whole trajectory, not just
at its endpoints. Grasped tissue is a linear spring surrogate: tension is
k_spring times the accumulated pull displacement, and opening the gripper
lets go of the spring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from voicebridge.robot_core.ik import solve_constrained_ik
from voicebridge.robot_core.kinematics import (
    KinematicChain,
    Pose,
    RcmConstraint,
    compute_frames,
    point_segment_distance,
)
from voicebridge.robot_core.trajectory import (
    MotionLimits,
    Trajectory,
    concatenate,
    plan_trajectory,
)
from voicebridge.session import ActionKind, RobotAction, accumulate_pull

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["Scenario", "RobotState", "RobotSimulator", "load_scenario"]

GRIPPER_RAMP_S = 0.5  # full open<->close travel time
CARTESIAN_VIA_STEP = 0.002  # m between IK via points
PULL_SANITY_FACTOR = 10.0  # max single-command pull, in pull steps
DEFAULT_TICK_S = 0.01


@dataclass(frozen=True)
class Scenario:
    """Task-side constants: trocar, grasp target, pull direction, tissue spring."""

    rcm: RcmConstraint
    grasp_pose: Pose
    pull_axis: np.ndarray
    pull_step: float
    k_spring: float

    def __post_init__(self) -> None:
        axis = np.asarray(self.pull_axis, dtype=float)
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("pull_axis must be a unit vector")
        object.__setattr__(self, "pull_axis", axis)
        if self.pull_step <= 0 or self.k_spring <= 0:
            raise ValueError("pull_step and k_spring must be > 0")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return Scenario(
        rcm=RcmConstraint(
            trocar_point=np.asarray(data["trocar"]["point"], dtype=float),
            tolerance=float(data["trocar"].get("tolerance", 1e-3)),
        ),
        grasp_pose=Pose(
            position=np.asarray(data["grasp"]["position"], dtype=float),
            orientation=np.asarray(data["grasp"]["orientation_wxyz"], dtype=float),
        ),
        pull_axis=np.asarray(data["pull"]["axis"], dtype=float),
        pull_step=float(data["pull"].get("step", 0.005)),
        k_spring=float(data["tissue"].get("k_spring", 50.0)),
    )


@dataclass(frozen=True)
class RobotState:
    """Immutable snapshot published to the session, bus, and dashboard."""

    joint_positions: np.ndarray
    gripper_aperture: float
    tool_tip_pose: Pose
    rcm_error: float
    pull_displacement: float
    tension: float
    sim_time: float


@dataclass(frozen=True)
class PlannedAction:
    """Outcome of planning one action from a given start, before execution."""

    action: RobotAction
    trajectory: Trajectory | None
    q_end: np.ndarray
    pull_displacement: float
    gripper_target: float | None


class RobotSimulator:
    """Owns the mutable robot state; actions plan here and play out in step()."""

    def __init__(
        self,
        chain: KinematicChain,
        scenario: Scenario,
        tick: float = DEFAULT_TICK_S,
        q0: np.ndarray | None = None,
    ):
        self.chain = chain
        self.scenario = scenario
        self.tick = tick
        self.limits = MotionLimits.from_chain(chain)
        self._q = chain.require_within_limits(
            chain.home if q0 is None else np.asarray(q0, dtype=float)
        ).copy()
        self._aperture = 1.0  # start open
        self._gripper_target = 1.0
        self._pull_displacement = 0.0
        self._sim_time = 0.0
        self._active: Trajectory | None = None
        self._traj_clock = 0.0
        self._velocities = np.zeros(chain.n_joints)

    # -- read access -------------------------------------------------------

    @property
    def joint_positions(self) -> np.ndarray:
        return self._q.copy()

    @property
    def joint_velocities(self) -> np.ndarray:
        return self._velocities.copy()

    @property
    def sim_time(self) -> float:
        return self._sim_time

    @property
    def pull_displacement(self) -> float:
        return self._pull_displacement

    @property
    def tension(self) -> float:
        return self.scenario.k_spring * self._pull_displacement

    @property
    def gripper_aperture(self) -> float:
        return self._aperture

    @property
    def busy(self) -> bool:
        return self._active is not None or abs(
            self._aperture - self._gripper_target
        ) > 1e-9

    def tip_pose(self) -> Pose:
        return compute_frames(self.chain, self._q).tip_pose

    def rcm_error(self) -> float:
        frames = compute_frames(self.chain, self._q)
        return point_segment_distance(
            self.scenario.rcm.trocar_point, frames.shaft_base, frames.shaft_tip
        )

    def state(self) -> RobotState:
        frames = compute_frames(self.chain, self._q)
        return RobotState(
            joint_positions=self._q.copy(),
            gripper_aperture=self._aperture,
            tool_tip_pose=frames.tip_pose,
            rcm_error=point_segment_distance(
                self.scenario.rcm.trocar_point, frames.shaft_base, frames.shaft_tip
            ),
            pull_displacement=self._pull_displacement,
            tension=self.tension,
            sim_time=self._sim_time,
        )

    # -- planning ----------------------------------------------------------

    def plan_cartesian_move(
        self, q_start: np.ndarray, target: Pose
    ) -> tuple[Trajectory | None, np.ndarray]:
        """IK along a straight tip path subdivided into short via steps.

        Raises NotReachableError if any via point has no solution.
        """
        start_tip = compute_frames(self.chain, q_start).shaft_tip
        move = target.position - start_tip
        dist = float(np.linalg.norm(move))
        n_via = max(1, math.ceil(dist / CARTESIAN_VIA_STEP))
        q_prev = q_start
        segments: list[Trajectory] = []
        for k in range(1, n_via + 1):
            via = Pose(start_tip + (k / n_via) * move, target.orientation)
            q_k = solve_constrained_ik(self.chain, via, self.scenario.rcm, q_prev)
            if np.max(np.abs(q_k - q_prev)) > 1e-12:
                segments.append(plan_trajectory(q_prev, q_k, self.limits))
            q_prev = q_k
        if not segments:
            return None, q_start
        return concatenate(segments), q_prev

    def plan_action(
        self, action: RobotAction, q_start: np.ndarray, pull_displacement: float
    ) -> PlannedAction:
        """Plan an action from a hypothetical start without touching state.

        Raises NotReachableError when the motion has no IK solution.
        """
        kind = action.kind
        if kind is ActionKind.REACH:
            target = action.pose if action.pose is not None else self.scenario.grasp_pose
            traj, q_end = self.plan_cartesian_move(q_start, target)
            return PlannedAction(action, traj, q_end, pull_displacement, None)
        if kind is ActionKind.PULL:
            if abs(action.distance) > PULL_SANITY_FACTOR * self.scenario.pull_step:
                raise ValueError(
                    f"pull of {action.distance} m exceeds the per-command bound"
                )
            new_disp = accumulate_pull(pull_displacement, action)
            applied = new_disp - pull_displacement
            frames = compute_frames(self.chain, q_start)
            target = Pose(
                frames.shaft_tip + applied * self.scenario.pull_axis,
                frames.tip_pose.orientation,
            )
            traj, q_end = self.plan_cartesian_move(q_start, target)
            return PlannedAction(action, traj, q_end, new_disp, None)
        if kind is ActionKind.GRASP:
            return PlannedAction(action, None, q_start, pull_displacement, 0.0)
        if kind is ActionKind.OPEN_GRIPPER:
            # Letting go releases the tissue spring.
            return PlannedAction(action, None, q_start, 0.0, 1.0)
        # HALT and NOOP plan to nothing; HALT acts immediately in execute.
        return PlannedAction(action, None, q_start, pull_displacement, None)

    # -- execution ---------------------------------------------------------

    def execute_action(self, action: RobotAction) -> Trajectory | None:
        """Apply an action now: solve, install its trajectory, update state.

        A NotReachableError leaves the simulator untouched.
        """
        if action.kind is ActionKind.HALT:
            self.halt()
            return None
        if action.kind is ActionKind.NOOP:
            return None
        planned = self.plan_action(action, self._q, self._pull_displacement)
        self._pull_displacement = planned.pull_displacement
        if planned.gripper_target is not None:
            self._gripper_target = planned.gripper_target
        if planned.trajectory is not None:
            self._active = planned.trajectory
            self._traj_clock = 0.0
        return planned.trajectory

    def halt(self) -> None:
        """Cancel any active motion; the next tick reports zero velocity."""
        self._active = None
        self._traj_clock = 0.0
        self._gripper_target = self._aperture
        self._velocities = np.zeros(self.chain.n_joints)

    def step(self, dt: float | None = None) -> RobotState:
        """Advance the simulation one tick via waypoint interpolation."""
        dt = self.tick if dt is None else dt
        if dt <= 0:
            raise ValueError("dt must be > 0")
        q_before = self._q
        if self._active is not None:
            self._traj_clock += dt
            self._q = self._active.sample(self._traj_clock)
            if self._traj_clock >= self._active.duration:
                self._q = self._active.end_configuration.copy()
                self._active = None
                self._traj_clock = 0.0
        self._velocities = (self._q - q_before) / dt

        if self._aperture != self._gripper_target:
            rate = 1.0 / GRIPPER_RAMP_S
            delta = np.clip(
                self._gripper_target - self._aperture, -rate * dt, rate * dt
            )
            self._aperture = float(np.clip(self._aperture + delta, 0.0, 1.0))

        self._sim_time += dt
        return self.state()
