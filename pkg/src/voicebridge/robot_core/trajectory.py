"""Time-synchronized trapezoidal velocity profiles sampled at a fixed rate.

Every joint runs at its own acceleration limit; the slowest joint sets the
common duration and the others stretch their cruise phase to finish
together, which keeps each joint's peak velocity at or below its limit.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from voicebridge.robot_core.kinematics import JointLimitError, KinematicChain

__all__ = ["MotionLimits", "Trajectory", "plan_trajectory", "SAMPLE_RATE"]

SAMPLE_RATE = 100.0  # Hz


@dataclass(frozen=True)
class MotionLimits:
    """Per-joint motion envelope used by the planner."""

    v_max: np.ndarray
    a_max: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        for name in ("v_max", "a_max", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.v_max <= 0) or np.any(self.a_max <= 0):
            raise ValueError("velocity and acceleration limits must be > 0")

    @staticmethod
    def from_chain(chain: KinematicChain) -> "MotionLimits":
        return MotionLimits(
            v_max=chain.velocity_limits,
            a_max=chain.acceleration_limits,
            lower=chain.lower_limits,
            upper=chain.upper_limits,
        )

    def require_within(self, q: np.ndarray, label: str) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if np.any(q < self.lower - 1e-9) or np.any(q > self.upper + 1e-9):
            raise JointLimitError(f"{label} violates joint limits")
        return q


@dataclass(frozen=True)
class Trajectory:
    """Sampled joint-space path: (time, configuration) waypoints."""

    waypoints: tuple[tuple[float, np.ndarray], ...]
    profile: MotionLimits

    def __post_init__(self) -> None:
        times = [t for t, _ in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "_times", times)

    @property
    def duration(self) -> float:
        return self.waypoints[-1][0]

    @property
    def end_configuration(self) -> np.ndarray:
        return self.waypoints[-1][1]

    def sample(self, t: float) -> np.ndarray:
        """Linear interpolation between waypoints, clamped to the ends."""
        times: list[float] = self._times  # type: ignore[attr-defined]
        if t <= times[0]:
            return self.waypoints[0][1]
        if t >= times[-1]:
            return self.waypoints[-1][1]
        hi = bisect.bisect_right(times, t)
        t0, q0 = self.waypoints[hi - 1]
        t1, q1 = self.waypoints[hi]
        alpha = (t - t0) / (t1 - t0)
        return q0 + alpha * (q1 - q0)


def _min_duration(dist: float, v: float, a: float) -> float:
    if dist <= 0:
        return 0.0
    if dist <= v * v / a:
        return 2.0 * np.sqrt(dist / a)  # triangular profile
    return dist / v + v / a


def _position(t: float, dist: float, a: float, t_acc: float, total: float) -> float:
    # Symmetric accelerate / cruise / decelerate along a nonnegative distance.
    v_peak = a * t_acc
    if t <= 0:
        return 0.0
    if t < t_acc:
        return 0.5 * a * t * t
    if t < total - t_acc:
        return 0.5 * a * t_acc * t_acc + v_peak * (t - t_acc)
    if t < total:
        remaining = total - t
        return dist - 0.5 * a * remaining * remaining
    return dist


def plan_trajectory(
    q_from: np.ndarray,
    q_to: np.ndarray,
    limits: MotionLimits,
    sample_rate: float = SAMPLE_RATE,
) -> Trajectory:
    """Plan a rest-to-rest move between two in-limit configurations.

    Duration is the analytic trapezoid/triangle time of the slowest joint;
    the rest re-time at their own acceleration limit with a lower cruise
    velocity so all joints arrive simultaneously.
    """
    q_from = limits.require_within(q_from, "start configuration")
    q_to = limits.require_within(q_to, "goal configuration")

    delta = q_to - q_from
    dist = np.abs(delta)
    durations = [
        _min_duration(d, v, a) for d, v, a in zip(dist, limits.v_max, limits.a_max)
    ]
    total = max(durations)
    if total == 0.0:
        return Trajectory(waypoints=((0.0, q_from.copy()),), profile=limits)

    # Stretch each moving joint to the common duration: with acceleration
    # fixed at a, d = a * t_acc * (total - t_acc) solves for the accel time.
    t_acc = np.zeros_like(dist)
    moving = dist > 0
    a_mov = limits.a_max[moving]
    disc = total * total - 4.0 * dist[moving] / a_mov
    t_acc[moving] = 0.5 * (total - np.sqrt(np.maximum(disc, 0.0)))

    dt = 1.0 / sample_rate
    n_steps = int(np.floor(total / dt + 1e-9))
    times = [k * dt for k in range(n_steps + 1)]
    if total - times[-1] > 1e-9:
        times.append(total)
    else:
        times[-1] = total

    sign = np.sign(delta)
    waypoints = []
    for t in times:
        covered = np.array(
            [
                _position(t, d, a, ta, total) if d > 0 else 0.0
                for d, a, ta in zip(dist, limits.a_max, t_acc)
            ]
        )
        waypoints.append((t, q_from + sign * covered))
    # Land exactly on the goal.
    waypoints[-1] = (total, q_to.copy())
    return Trajectory(waypoints=tuple(waypoints), profile=limits)


def concatenate(segments: list[Trajectory]) -> Trajectory:
    """Chain rest-to-rest trajectories end to end on a shifted time axis."""
    if not segments:
        raise ValueError("need at least one segment")
    waypoints: list[tuple[float, np.ndarray]] = list(segments[0].waypoints)
    for seg in segments[1:]:
        offset = waypoints[-1][0]
        # The segment starts where the previous one ended; skip the duplicate.
        for t, q in seg.waypoints[1:]:
            waypoints.append((offset + t, q))
    return Trajectory(waypoints=tuple(waypoints), profile=segments[0].profile)
