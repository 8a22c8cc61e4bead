"""Damped least-squares inverse kinematics with an RCM secondary task.

The solver stacks three tasks: tool-tip position, shaft-axis direction
(tool roll is left free), and keeping the trocar point on the shaft. The
RCM rows are weighted 10x the tip task. Iterates a damped pseudo-inverse
step with joint-limit clamping until every tolerance is met.
"""

from __future__ import annotations

import numpy as np

from voicebridge.robot_core.kinematics import (
    ChainFrames,
    KinematicChain,
    Pose,
    RcmConstraint,
    closest_point_on_segment,
    compute_frames,
    quat_to_matrix,
)

__all__ = ["NotReachableError", "solve_constrained_ik"]

POSITION_TOLERANCE = 1e-4  # m
AXIS_TOLERANCE = 1e-2  # rad
DAMPING = 1e-2
MAX_ITERATIONS = 500
RCM_WEIGHT = 10.0
MAX_STEP = 0.3  # rad, per-iteration infinity-norm clamp
# Converge the RCM tighter than the constraint so joint-space interpolation
# between nearby solutions keeps the executed path inside tolerance.
RCM_CONVERGENCE_FRACTION = 0.3


class NotReachableError(RuntimeError):
    """The solver failed to meet the tolerances within its iteration budget."""


def _axis_alignment_error(current: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Rotation vector taking ``current`` onto ``target`` (unit inputs)."""
    cross = np.cross(current, target)
    s = np.linalg.norm(cross)
    c = float(current @ target)
    angle = np.arctan2(s, c)
    if s < 1e-12:
        if c > 0:
            return np.zeros(3)
        # Antiparallel: rotate about any perpendicular direction.
        perp = np.cross(current, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(current, [0.0, 1.0, 0.0])
        return np.pi * perp / np.linalg.norm(perp)
    return cross / s * angle


def _errors(
    frames: ChainFrames, target_pos: np.ndarray, target_axis: np.ndarray,
    constraint: RcmConstraint,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    e_pos = target_pos - frames.shaft_tip
    e_axis = _axis_alignment_error(frames.shaft_axis, target_axis)
    rcm_point = closest_point_on_segment(
        constraint.trocar_point, frames.shaft_base, frames.shaft_tip
    )
    e_rcm = constraint.trocar_point - rcm_point
    return e_pos, e_axis, e_rcm, rcm_point


def solve_constrained_ik(
    chain: KinematicChain,
    target: Pose,
    constraint: RcmConstraint,
    q0: np.ndarray,
    position_tolerance: float = POSITION_TOLERANCE,
    axis_tolerance: float = AXIS_TOLERANCE,
    damping: float = DAMPING,
    max_iterations: int = MAX_ITERATIONS,
) -> np.ndarray:
    """Solve for joints placing the tool tip at ``target`` with the shaft
    through the trocar.

    Only the shaft-axis direction of ``target.orientation`` is constrained.
    Returns a configuration within joint limits satisfying the position,
    axis, and RCM tolerances; raises :class:`NotReachableError` otherwise.
    """
    q = chain.clamp(np.asarray(q0, dtype=float))
    target_pos = target.position
    target_axis = quat_to_matrix(target.orientation) @ np.array([0.0, 0.0, 1.0])
    target_axis = target_axis / np.linalg.norm(target_axis)
    rcm_goal = constraint.tolerance * RCM_CONVERGENCE_FRACTION

    damping_sq = damping * damping
    for _ in range(max_iterations):
        frames = compute_frames(chain, q)
        e_pos, e_axis, e_rcm, rcm_point = _errors(
            frames, target_pos, target_axis, constraint
        )
        if (
            np.linalg.norm(e_pos) <= position_tolerance
            and np.linalg.norm(e_axis) <= axis_tolerance
            and np.linalg.norm(e_rcm) <= rcm_goal
        ):
            return q

        # Geometric Jacobians: column i is axis_i x (point - origin_i) for a
        # point task and axis_i for the angular task.
        arm = frames.shaft_tip[None, :] - frames.joint_origins
        j_tip = np.cross(frames.joint_axes, arm).T
        j_rot = frames.joint_axes.T
        arm_rcm = rcm_point[None, :] - frames.joint_origins
        j_rcm = np.cross(frames.joint_axes, arm_rcm).T
        # Sliding the shaft through the trocar is harmless; only the motion
        # perpendicular to the shaft moves the closest point off the trocar.
        # Keep the full rows when the closest point clamps to an endpoint.
        base, tip = frames.shaft_base, frames.shaft_tip
        interior = (
            np.linalg.norm(rcm_point - base) > 1e-9
            and np.linalg.norm(rcm_point - tip) > 1e-9
        )
        if interior:
            s_axis = frames.shaft_axis
            j_rcm = j_rcm - np.outer(s_axis, s_axis @ j_rcm)

        jac = np.vstack([j_tip, j_rot, RCM_WEIGHT * j_rcm])
        err = np.concatenate([e_pos, e_axis, RCM_WEIGHT * e_rcm])

        gram = jac @ jac.T + damping_sq * np.eye(jac.shape[0])
        dq = jac.T @ np.linalg.solve(gram, err)
        step = np.max(np.abs(dq))
        if step > MAX_STEP:
            dq *= MAX_STEP / step
        q = chain.clamp(q + dq)

    raise NotReachableError(
        f"no solution within {max_iterations} iterations "
        f"(pos err {np.linalg.norm(e_pos):.3g} m, rcm err {np.linalg.norm(e_rcm):.3g} m)"
    )
