"""7-DOF serial kinematic chain: forward kinematics, geometric Jacobian,
joint limits, and coarse sphere-vs-box collision checking against the scene.

Each joint contributes Trans(offset) . Rot(axis, q_i); a fixed tool offset
follows the last joint. All chain quantities live in the robot base frame;
collision checking maps link spheres into the table frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ArmConfig, GripperParams
from .geometry import FrameId, RigidTransform, matrix_to_quat
from .scene import Scene, SceneObject


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray  # unit axis in the parent link frame
    offset: np.ndarray  # fixed translation before the rotation
    lo: float
    hi: float
    speed: float  # rad/s

    def __post_init__(self) -> None:
        a = np.asarray(self.axis, dtype=float).reshape(3)
        a = a / np.linalg.norm(a)
        o = np.asarray(self.offset, dtype=float).reshape(3)
        a.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "offset", o)


@dataclass(frozen=True)
class CollisionSphere:
    link: int  # 1-based joint frame index the sphere rides on
    center: np.ndarray  # link-local center
    radius: float


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple[Joint, ...]
    tool_offset: np.ndarray
    spheres: tuple[CollisionSphere, ...]
    gripper: GripperParams
    home_q: np.ndarray

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def reach(self) -> float:
        """Upper bound on gripper distance from the base origin."""
        return float(sum(np.linalg.norm(j.offset) for j in self.joints)
                     + np.linalg.norm(self.tool_offset))

    def limits_lo(self) -> np.ndarray:
        return np.array([j.lo for j in self.joints])

    def limits_hi(self) -> np.ndarray:
        return np.array([j.hi for j in self.joints])

    def speeds(self) -> np.ndarray:
        return np.array([j.speed for j in self.joints])

    def within_limits(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.limits_lo() - tol)
                    and np.all(q <= self.limits_hi() + tol))

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.limits_lo(), self.limits_hi())


def chain_from_config(cfg: ArmConfig) -> KinematicChain:
    joints = tuple(Joint(np.array(j["axis"], dtype=float),
                         np.array(j["offset"], dtype=float),
                         float(j["lo"]), float(j["hi"]), float(j["speed"]))
                   for j in cfg.joints)
    spheres = tuple(CollisionSphere(int(s["link"]),
                                    np.array(s["center"], dtype=float),
                                    float(s["radius"]))
                    for s in cfg.collision_spheres)
    return KinematicChain(joints, cfg.tool_offset.copy(), spheres,
                          cfg.gripper, cfg.home_q.copy())


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = axis
    cc = 1.0 - c
    return np.array([
        [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
        [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
        [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
    ])


def fk_frames(chain: KinematicChain, q: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rotation/translation of every joint frame plus the tool frame.

    Returns n_joints + 1 pairs (R, p); the last entry is the gripper.
    """
    q = np.asarray(q, dtype=float)
    r = np.eye(3)
    p = np.zeros(3)
    frames = []
    for joint, qi in zip(chain.joints, q):
        p = p + r @ joint.offset
        r = r @ _axis_rotation(joint.axis, float(qi))
        frames.append((r, p))
    frames.append((r, p + r @ chain.tool_offset))
    return frames


def fk_rp(chain: KinematicChain, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tool rotation matrix and position; cheap form for inner loops."""
    return fk_frames(chain, q)[-1]


def fk(chain: KinematicChain, q: np.ndarray) -> RigidTransform:
    """Gripper pose (RobotBase <- Gripper) for a joint configuration."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n_joints,) or not np.all(np.isfinite(q)):
        raise ValueError("q must be 7 finite joint angles")
    r, p = fk_frames(chain, q)[-1]
    return RigidTransform(matrix_to_quat(r), p, FrameId.ROBOT_BASE, FrameId.GRIPPER)


def jacobian(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (6 x 7): rows 0-2 linear m/rad, rows 3-5 angular."""
    q = np.asarray(q, dtype=float)
    frames = fk_frames(chain, q)
    p_e = frames[-1][1]
    jac = np.zeros((6, chain.n_joints))
    r = np.eye(3)
    p = np.zeros(3)
    for i, (joint, qi) in enumerate(zip(chain.joints, q)):
        p = p + r @ joint.offset
        axis_world = r @ joint.axis  # axis direction before this rotation
        lever = p_e - p
        jac[0, i] = axis_world[1] * lever[2] - axis_world[2] * lever[1]
        jac[1, i] = axis_world[2] * lever[0] - axis_world[0] * lever[2]
        jac[2, i] = axis_world[0] * lever[1] - axis_world[1] * lever[0]
        jac[3:, i] = axis_world
        r = r @ _axis_rotation(joint.axis, float(qi))
    return jac


# --------------------------------------------------------------------------
# collision checking
# --------------------------------------------------------------------------

def _object_obb(obj: SceneObject) -> tuple[RigidTransform, np.ndarray, np.ndarray]:
    """Object-local axis-aligned bounding box: (pose, center, half extents)."""
    los, his = [], []
    for prim in obj.primitives:
        poly = prim.footprint_local()
        los.append([poly[:, 0].min(), poly[:, 1].min(), prim.bottom_z])
        his.append([poly[:, 0].max(), poly[:, 1].max(), prim.top_z])
    lo = np.min(los, axis=0)
    hi = np.max(his, axis=0)
    return obj.pose, (lo + hi) / 2, (hi - lo) / 2


def sphere_box_distance(center: np.ndarray, box_pose: RigidTransform,
                        box_center: np.ndarray, half: np.ndarray) -> float:
    """Distance from a point to an oriented box (0 when inside)."""
    local = box_pose.invert().apply(center) - box_center
    clamped = np.clip(local, -half, half)
    return float(np.linalg.norm(local - clamped))


def sphere_positions(chain: KinematicChain, q: np.ndarray) -> list[tuple[np.ndarray, float]]:
    """World (base-frame) centers and radii of all collision spheres."""
    frames = fk_frames(chain, q)
    out = []
    for s in chain.spheres:
        r, p = frames[s.link - 1]
        out.append((p + r @ s.center, s.radius))
    return out


def collision_free(chain: KinematicChain, q: np.ndarray, scene: Scene,
                   table_from_base: RigidTransform,
                   held: int | None = None) -> bool:
    """True iff no link sphere penetrates the table halfspace or intersects
    any non-held object's bounding box."""
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("non-finite joint configuration")
    obstacles = [_object_obb(o) for o in scene.objects
                 if o.id != held and o.id not in scene.off_table]
    for center_base, radius in sphere_positions(chain, q):
        center_table = table_from_base.apply(center_base)
        if center_table[2] < radius:  # sphere dips into the table halfspace
            return False
        for pose, box_center, half in obstacles:
            if sphere_box_distance(center_table, pose, box_center, half) < radius:
                return False
    return True
