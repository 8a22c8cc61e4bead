"""Serial-chain kinematics: poses, the 10-joint chain model, FK, and RCM error.

The chain is 7 arm joints plus 3 tool joints, all revolute. Each joint
contributes a fixed link transform followed by a rotation about its axis;
the tool shaft is a segment fixed in the last link's frame. The remote
center of motion error is the distance from the trocar point to that
segment in world coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SURGICAL_CHAIN_JOINTS = 10


class JointLimitError(ValueError):
    """A joint configuration violates the chain's position limits."""


def _unit(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise ValueError(f"{name} must be a nonzero vector")
    return v / norm


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Unit quaternion (w, x, y, z) rotating by ``angle`` about ``axis``."""
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * np.asarray(axis, float)))


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(rot: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    trace = np.trace(rot)
    if trace > 0:
        s = 2.0 * np.sqrt(1.0 + trace)
        q = np.array(
            [
                0.25 * s,
                (rot[2, 1] - rot[1, 2]) / s,
                (rot[0, 2] - rot[2, 0]) / s,
                (rot[1, 0] - rot[0, 1]) / s,
            ]
        )
    else:
        i = int(np.argmax(np.diag(rot)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * np.sqrt(1.0 + rot[i, i] - rot[j, j] - rot[k, k])
        q = np.empty(4)
        q[0] = (rot[k, j] - rot[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (rot[j, i] + rot[i, j]) / s
        q[1 + k] = (rot[k, i] + rot[i, k]) / s
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic z-y-x (yaw, pitch, roll) rotation matrix."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class Pose:
    """Position plus unit quaternion orientation (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("orientation quaternion must have unit norm")
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: fixed link transform, rotation axis, and limits."""

    name: str
    axis: np.ndarray
    translation: np.ndarray
    rotation: np.ndarray  # fixed link rotation, quaternion (w, x, y, z)
    limit_min: float
    limit_max: float
    velocity_limit: float
    acceleration_limit: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "axis", _unit(self.axis, f"{self.name} axis"))
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=float)
        )
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        if self.limit_min >= self.limit_max:
            raise ValueError(f"{self.name}: limit_min must be < limit_max")
        if self.velocity_limit <= 0 or self.acceleration_limit <= 0:
            raise ValueError(f"{self.name}: velocity/acceleration limits must be > 0")


@dataclass(frozen=True)
class KinematicChain:
    """An ordered serial chain of revolute joints carrying a rigid tool shaft.

    The shaft is a segment (base -> tip) expressed in the frame of the last
    link; the tool tip pose tracks the shaft tip. The surgical configuration
    is 10 joints (enforced by :func:`load_chain`); smaller chains are allowed
    here so analytic test rigs can be built directly.
    """

    joints: tuple[JointSpec, ...]
    shaft_base: np.ndarray
    shaft_tip: np.ndarray
    home: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "joints", tuple(self.joints))
        if not self.joints:
            raise ValueError("chain needs at least one joint")
        base = np.asarray(self.shaft_base, dtype=float)
        tip = np.asarray(self.shaft_tip, dtype=float)
        if np.linalg.norm(tip - base) < 1e-12:
            raise ValueError("shaft base and tip must be distinct")
        object.__setattr__(self, "shaft_base", base)
        object.__setattr__(self, "shaft_tip", tip)
        home = (
            np.zeros(self.n_joints)
            if self.home is None
            else np.asarray(self.home, dtype=float)
        )
        if home.shape != (self.n_joints,):
            raise ValueError("home vector length must match the joint count")
        object.__setattr__(self, "home", home)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.limit_min for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.limit_max for j in self.joints])

    @property
    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity_limit for j in self.joints])

    @property
    def acceleration_limits(self) -> np.ndarray:
        return np.array([j.acceleration_limit for j in self.joints])

    def within_limits(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(
            np.all(q >= self.lower_limits - tol) and np.all(q <= self.upper_limits + tol)
        )

    def require_within_limits(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n_joints,):
            raise ValueError(
                f"expected {self.n_joints} joint values, got shape {q.shape}"
            )
        if not self.within_limits(q):
            bad = np.where(
                (q < self.lower_limits - 1e-9) | (q > self.upper_limits + 1e-9)
            )[0]
            names = ", ".join(self.joints[i].name for i in bad)
            raise JointLimitError(f"joint limits violated: {names}")
        return q

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lower_limits, self.upper_limits)


@dataclass(frozen=True)
class RcmConstraint:
    """Trocar point the tool shaft must pass through, with a tolerance."""

    trocar_point: np.ndarray
    tolerance: float = 1e-3

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "trocar_point", np.asarray(self.trocar_point, dtype=float)
        )
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class ChainFrames:
    """World-frame quantities of one configuration, shared by FK and IK."""

    joint_origins: np.ndarray  # (n, 3) origin of each joint's rotation
    joint_axes: np.ndarray  # (n, 3) world-frame rotation axes
    last_rotation: np.ndarray  # (3, 3) world rotation of the last link
    last_origin: np.ndarray  # (3,) world origin of the last link
    shaft_base: np.ndarray
    shaft_tip: np.ndarray

    @property
    def tip_pose(self) -> Pose:
        return Pose(self.shaft_tip, matrix_to_quat(self.last_rotation))

    @property
    def shaft_axis(self) -> np.ndarray:
        d = self.shaft_tip - self.shaft_base
        return d / np.linalg.norm(d)


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    # Rodrigues' formula for a unit axis.
    c, s = np.cos(angle), np.sin(angle)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + s * k + (1 - c) * (k @ k)


def compute_frames(chain: KinematicChain, q: np.ndarray) -> ChainFrames:
    """Compose link transforms in order and collect Jacobian ingredients."""
    q = np.asarray(q, dtype=float)
    rot = np.eye(3)
    pos = np.zeros(3)
    origins = np.empty((chain.n_joints, 3))
    axes = np.empty((chain.n_joints, 3))
    for i, joint in enumerate(chain.joints):
        pos = pos + rot @ joint.translation
        rot = rot @ quat_to_matrix(joint.rotation)
        origins[i] = pos
        axes[i] = rot @ joint.axis
        rot = rot @ _axis_rotation(joint.axis, q[i])
    return ChainFrames(
        joint_origins=origins,
        joint_axes=axes,
        last_rotation=rot,
        last_origin=pos,
        shaft_base=pos + rot @ chain.shaft_base,
        shaft_tip=pos + rot @ chain.shaft_tip,
    )


def forward_kinematics(
    chain: KinematicChain, q: np.ndarray
) -> tuple[Pose, tuple[np.ndarray, np.ndarray]]:
    """Tool-tip pose and the world-frame shaft segment at configuration ``q``.

    Raises :class:`JointLimitError` if ``q`` violates the position limits.
    """
    q = chain.require_within_limits(q)
    frames = compute_frames(chain, q)
    return frames.tip_pose, (frames.shaft_base, frames.shaft_tip)


def closest_point_on_segment(
    point: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray
) -> np.ndarray:
    """Point on segment [a, b] closest to ``point`` (endpoints clamped)."""
    ab = seg_b - seg_a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float((point - seg_a) @ ab) / denom
    return seg_a + np.clip(t, 0.0, 1.0) * ab


def point_segment_distance(
    point: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray
) -> float:
    return float(np.linalg.norm(point - closest_point_on_segment(point, seg_a, seg_b)))


def rcm_error(
    chain: KinematicChain, q: np.ndarray, constraint: RcmConstraint
) -> float:
    """Distance from the trocar point to the world-frame tool shaft segment."""
    frames = compute_frames(chain, chain.require_within_limits(q))
    return point_segment_distance(
        constraint.trocar_point, frames.shaft_base, frames.shaft_tip
    )


def load_chain(path: str | Path) -> KinematicChain:
    """Load the 10-joint surgical chain description from a TOML file."""
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    joints = []
    for entry in data.get("joint", []):
        roll, pitch, yaw = entry.get("rotation_rpy", (0.0, 0.0, 0.0))
        joints.append(
            JointSpec(
                name=str(entry["name"]),
                axis=np.asarray(entry["axis"], dtype=float),
                translation=np.asarray(entry["translation"], dtype=float),
                rotation=matrix_to_quat(rpy_to_matrix(roll, pitch, yaw)),
                limit_min=float(entry["limit"][0]),
                limit_max=float(entry["limit"][1]),
                velocity_limit=float(entry["velocity_limit"]),
                acceleration_limit=float(entry["acceleration_limit"]),
            )
        )
    if len(joints) != SURGICAL_CHAIN_JOINTS:
        raise ValueError(
            f"{path}: expected {SURGICAL_CHAIN_JOINTS} joints, found {len(joints)}"
        )
    shaft = data["shaft"]
    chain = KinematicChain(
        joints=tuple(joints),
        shaft_base=np.asarray(shaft["base"], dtype=float),
        shaft_tip=np.asarray(shaft["tip"], dtype=float),
        home=np.asarray(data["home"], dtype=float),
    )
    chain.require_within_limits(chain.home)
    return chain
