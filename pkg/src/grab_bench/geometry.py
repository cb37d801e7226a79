"""Grasp-pose geometry: coordinate chains, quaternions, score combination, filtering.

Conventions: translations in meters, quaternions as (x, y, z, w) with w >= 0,
and the local +z axis of an executable pose is its approach direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidDepthError, InvalidPoseError, InvalidRotationError

_ORTHO_TOL = 1e-9


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise DomainError(f"expected a 3-vector, got shape {a.shape}")
    return a


def _check_rotation(r: np.ndarray, tol: float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise InvalidRotationError(f"rotation must be 3x3, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise InvalidRotationError("rotation contains non-finite entries")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise InvalidRotationError("matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise InvalidRotationError("matrix determinant is not +1")
    return r


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DomainError("focal lengths must be positive")


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform: rotation (3x3, det +1) plus translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, _ORTHO_TOL))
        object.__setattr__(self, "translation", _as_vec3(self.translation))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one 3-vector or an (N, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return self ∘ other (apply `other` first)."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)


@dataclass(frozen=True)
class KinematicChain:
    """Ordered links base→...→end, composed left to right."""

    links: tuple[RigidTransform, ...]

    def __post_init__(self):
        links = tuple(self.links)
        if not links:
            raise DomainError("kinematic chain must be non-empty")
        object.__setattr__(self, "links", links)


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (x, y, z, w), canonical sign w >= 0."""

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        for name in ("x", "y", "z", "w"):
            object.__setattr__(self, name, float(getattr(self, name)))
        n = math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2 + self.w ** 2)
        if abs(n - 1.0) > _ORTHO_TOL:
            raise DomainError(f"quaternion norm {n} is not 1")
        if self.w < 0:
            raise DomainError("quaternion sign is not canonical (w < 0)")

    @staticmethod
    def _canonical(x: float, y: float, z: float, w: float) -> "Quaternion":
        # Resolve the double cover: w >= 0; at w == 0 the first nonzero of
        # (x, y, z) is made positive.
        if w < 0:
            x, y, z, w = -x, -y, -z, -w
        elif w == 0:
            w = 0.0  # normalize -0.0
            for c in (x, y, z):
                if c != 0:
                    if c < 0:
                        x, y, z = -x, -y, -z
                    break
        return Quaternion(x, y, z, w)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w])

    def to_rotation(self) -> np.ndarray:
        x, y, z, w = self.x, self.y, self.z, self.w
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])


@dataclass(frozen=True)
class ParallelGraspPose:
    """Parallel-jaw grasp in camera frame: orientation, center, width, scores."""

    rotation: np.ndarray
    center: np.ndarray
    width: float
    original_score: float
    stable_score: float

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, 1e-6))
        object.__setattr__(self, "center", _as_vec3(self.center))
        if self.width < 0:
            raise DomainError("grasp width must be >= 0")
        for name in ("original_score", "stable_score"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class SuctionPose:
    """Suction grasp in camera frame: contact point and outward surface normal."""

    point: np.ndarray
    direction: np.ndarray
    score: float

    def __post_init__(self):
        object.__setattr__(self, "point", _as_vec3(self.point))
        d = _as_vec3(self.direction)
        n = np.linalg.norm(d)
        if n == 0:
            raise InvalidPoseError("suction direction is the zero vector")
        if abs(n - 1.0) > _ORTHO_TOL:
            raise InvalidPoseError(f"suction direction norm {n} is not 1")
        object.__setattr__(self, "direction", d)
        if not 0.0 <= self.score <= 1.0:
            raise DomainError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True, eq=False)
class ExecutablePose:
    """World-frame pose ready for execution: translation + quaternion + quality."""

    translation: np.ndarray
    orientation: Quaternion
    quality: float

    def __post_init__(self):
        object.__setattr__(self, "translation", _as_vec3(self.translation))
        if not 0.0 <= self.quality <= 1.0:
            raise DomainError(f"quality must be in [0, 1], got {self.quality}")

    def __eq__(self, other):
        if not isinstance(other, ExecutablePose):
            return NotImplemented
        return (bool(np.all(self.translation == other.translation))
                and self.orientation == other.orientation
                and self.quality == other.quality)

    @property
    def approach_axis(self) -> np.ndarray:
        """Local +z of the orientation: the approach direction."""
        return self.orientation.to_rotation()[:, 2]


@dataclass(frozen=True)
class WorkbenchPlane:
    """Plane {p : normal·p = offset}; normal stored unit-length."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _as_vec3(self.normal)
        length = np.linalg.norm(n)
        if length == 0:
            raise DomainError("plane normal must be nonzero")
        # Rescale so the stored (normal, offset) describe the same plane.
        object.__setattr__(self, "normal", n / length)
        object.__setattr__(self, "offset", float(self.offset) / length)

    def height_above(self, point) -> float:
        """Signed distance of a point along the unit normal."""
        return float(np.dot(self.normal, _as_vec3(point)) - self.offset)

    def transform(self, t: RigidTransform) -> "WorkbenchPlane":
        n = t.rotation @ self.normal
        return WorkbenchPlane(n, self.offset + float(np.dot(n, t.translation)))


def pixel_to_camera(intr: CameraIntrinsics, u: float, v: float, zc: float) -> np.ndarray:
    """Back-project pixel (u, v) at depth zc to camera coordinates."""
    if zc <= 0:
        raise InvalidDepthError(f"depth must be positive, got {zc}")
    return np.array([(u - intr.cx) * zc / intr.fx,
                     (v - intr.cy) * zc / intr.fy,
                     zc])


def compose_chain(chain: KinematicChain) -> RigidTransform:
    """Left-to-right product of the chain's links."""
    out = chain.links[0]
    for link in chain.links[1:]:
        out = out.compose(link)
    return out


def camera_to_world(t_world_cam: RigidTransform, p_cam) -> np.ndarray:
    """Apply the camera-to-world transform to a camera-frame point."""
    return t_world_cam.apply(_as_vec3(p_cam))


def rotation_to_quaternion(r: np.ndarray) -> Quaternion:
    """Extract the canonical unit quaternion of a rotation matrix.

    Uses the branch with the largest diagonal contribution for numerical
    stability; the induced matrix reproduces r within 1e-9.
    """
    r = _check_rotation(r, 1e-6)
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0:
        s = 0.5 / math.sqrt(trace + 1.0)
        w = 0.25 / s
        x = (r[2, 1] - r[1, 2]) * s
        y = (r[0, 2] - r[2, 0]) * s
        z = (r[1, 0] - r[0, 1]) * s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    n = math.sqrt(x * x + y * y + z * z + w * w)
    return Quaternion._canonical(x / n, y / n, z / n, w / n)


def final_grasp_score(original: float, stable: float, collision: bool) -> float:
    """Combine base and stability scores; collision-prone grasps score zero."""
    for name, v in (("original", original), ("stable", stable)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} score must be in [0, 1], got {v}")
    if collision:
        return 0.0
    return original * (1.0 - stable)


def _frame_from_approach(approach: np.ndarray) -> np.ndarray:
    """Rotation whose +z column is `approach`; roll fixed deterministically.

    Local x is the projection of world +x onto the plane orthogonal to the
    approach axis, falling back to world +y when they are parallel.
    """
    z = approach / np.linalg.norm(approach)
    for ref in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        x = ref - np.dot(ref, z) * z
        n = np.linalg.norm(x)
        if n > 1e-8:
            x = x / n
            break
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def grasp_to_executable(g: ParallelGraspPose | SuctionPose,
                        t_world_cam: RigidTransform) -> ExecutablePose:
    """Re-parameterize a detector pose into a world-frame translation + quaternion.

    Parallel poses carry quality = original_score × (1 − stable_score); suction
    poses carry their score and approach along −direction (into the surface).
    """
    if isinstance(g, ParallelGraspPose):
        translation = camera_to_world(t_world_cam, g.center)
        rotation = t_world_cam.rotation @ g.rotation
        quality = final_grasp_score(g.original_score, g.stable_score, collision=False)
    elif isinstance(g, SuctionPose):
        translation = camera_to_world(t_world_cam, g.point)
        approach = t_world_cam.rotation @ (-g.direction)
        if np.linalg.norm(approach) == 0:
            raise InvalidPoseError("suction approach direction is degenerate")
        rotation = _frame_from_approach(approach)
        quality = g.score
    else:
        raise DomainError(f"unsupported grasp pose type: {type(g).__name__}")
    return ExecutablePose(translation, rotation_to_quaternion(rotation), quality)


def approach_angle(pose: ExecutablePose, plane: WorkbenchPlane) -> float:
    """Angle in degrees between the approach axis and the plane (90 = perpendicular)."""
    axis = pose.approach_axis
    cos_to_normal = np.clip(abs(np.dot(axis, plane.normal)), 0.0, 1.0)
    return math.degrees(math.asin(cos_to_normal))


def filter_poses(candidates: list[ExecutablePose], plane: WorkbenchPlane,
                 gripper_clearance: float = 0.02,
                 min_angle: float = 30.0) -> list[ExecutablePose]:
    """Keep the top 8 candidates by quality, then drop unexecutable ones.

    A pose survives when its approach angle is at least min_angle degrees and
    its translation clears the workbench plane by gripper_clearance. An empty
    result is valid and signals that no executable pose exists.
    """
    ranked = sorted(range(len(candidates)), key=lambda i: (-candidates[i].quality, i))
    kept = []
    for i in ranked[:8]:
        pose = candidates[i]
        if approach_angle(pose, plane) < min_angle:
            continue
        if plane.height_above(pose.translation) < gripper_clearance:
            continue
        kept.append(pose)
    return kept


def pre_grasp_offset(pose: ExecutablePose, distance: float) -> ExecutablePose:
    """Back off along the approach axis by `distance`, orientation unchanged."""
    if distance <= 0:
        raise DomainError(f"offset distance must be positive, got {distance}")
    return ExecutablePose(pose.translation - distance * pose.approach_axis,
                          pose.orientation, pose.quality)


def poses_to_json(poses: list[ExecutablePose]) -> str:
    """Serialize a pose list as a JSON array of {translation, quaternion, quality}."""
    rows = [{"translation": [float(c) for c in p.translation],
             "quaternion": [p.orientation.x, p.orientation.y, p.orientation.z, p.orientation.w],
             "quality": p.quality} for p in poses]
    return json.dumps(rows)


def poses_from_json(text: str) -> list[ExecutablePose]:
    """Parse a pose list serialized by poses_to_json."""
    rows = json.loads(text)
    out = []
    for row in rows:
        q = row["quaternion"]
        out.append(ExecutablePose(np.array(row["translation"], dtype=float),
                                  Quaternion(q[0], q[1], q[2], q[3]),
                                  float(row["quality"])))
    return out
