"""Grasp rectangle representation and geometric candidate generation.

A grasp is a 5-tuple (x, y, w, h, theta): an oriented rectangle in the
table plane whose w-axis is the jaw closing direction and h the finger
contact length. Candidates are proposed on a fixed orientation grid from a
fitted 3D box, scored by jaw clearance, and lifted to a 6-DOF top-down
gripper pose in the robot base frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import GripperParams
from .errors import SimError
from .geometry import (
    FrameId,
    RigidTransform,
    matrix_to_quat,
    wrap_orientation,
)
from .perception import Box3D

DEFAULT_ORIENTATIONS = 16


class NoFeasibleGraspError(SimError):
    """Object wider than the jaw span in every orientation."""


@dataclass(frozen=True)
class GraspRect5D:
    x: float  # rectangle center, table frame (m)
    y: float
    w: float  # jaw opening span (m)
    h: float  # finger contact length (m)
    theta: float  # w-axis orientation in the table plane, (-pi/2, pi/2]

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError("grasp rectangle sides must be positive")
        if not (-math.pi / 2 < self.theta <= math.pi / 2 + 1e-12):
            raise ValueError("theta outside (-pi/2, pi/2]")


@dataclass(frozen=True)
class GraspCandidate:
    rect: GraspRect5D
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence outside [0, 1]")


@dataclass(frozen=True)
class GraspPose6D:
    pose: RigidTransform  # RobotBase <- Gripper
    opening: float  # commanded jaw span (m)
    approach: np.ndarray  # unit vector, robot base frame

    def __post_init__(self) -> None:
        a = np.asarray(self.approach, dtype=float).reshape(3)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError("approach must be unit norm")
        a.setflags(write=False)
        object.__setattr__(self, "approach", a)


def theta_grid(n: int = DEFAULT_ORIENTATIONS) -> np.ndarray:
    """n orientations spanning (-pi/2, pi/2], endpoint included."""
    return np.array([-math.pi / 2 + (k + 1) * math.pi / n for k in range(n)])


def propose_grasps(box: Box3D, gripper_max_opening: float,
                   gripper: GripperParams | None = None,
                   n_orientations: int = DEFAULT_ORIENTATIONS) -> list[GraspCandidate]:
    """Confidence-ranked grasp candidates centered on the fitted box.

    Required opening for orientation theta is the footprint width along
    theta plus the clearance margin; confidence is the normalized jaw
    clearance, scaled down for objects taller than the graspable height.
    Sorted by descending confidence, ties by smaller |theta|, then theta.
    """
    margin = gripper.clearance_margin if gripper else 0.01
    contact = gripper.contact_length if gripper else 0.04
    max_height = gripper.max_graspable_height if gripper else 0.12

    height_factor = 1.0
    if box.height > max_height:
        height_factor = max(0.0, min(1.0, max_height / box.height))

    candidates: list[GraspCandidate] = []
    for theta in theta_grid(n_orientations):
        theta = wrap_orientation(float(theta))
        required = box.footprint_width_along(theta) + margin
        if required > gripper_max_opening:
            continue
        confidence = (gripper_max_opening - required) / gripper_max_opening
        confidence = max(0.0, min(1.0, confidence * height_factor))
        rect = GraspRect5D(float(box.center[0]), float(box.center[1]),
                           required, contact, theta)
        candidates.append(GraspCandidate(rect, confidence))
    if not candidates:
        raise NoFeasibleGraspError(
            f"footprint exceeds jaw span {gripper_max_opening} m in every "
            f"orientation")
    candidates.sort(key=lambda c: (-c.confidence, abs(c.rect.theta), c.rect.theta))
    return candidates


def lift_to_pose(cand: GraspCandidate, box: Box3D,
                 table_to_base: RigidTransform) -> GraspPose6D:
    """Lift a grasp rectangle to a top-down 6-DOF gripper pose.

    The gripper z-axis (approach) points along -table normal, the x-axis
    (jaw closing direction) along theta, and the grasp point sits at the
    box center at height box_top - min(h/2, box_height/2). ``table_to_base``
    maps table coordinates into the robot base frame.
    """
    if table_to_base.child_frame is not FrameId.TABLE:
        raise ValueError("table_to_base must have the table as child frame")
    theta = cand.rect.theta
    c, s = math.cos(theta), math.sin(theta)
    # Columns: gripper x (closing axis), y, z (approach, straight down).
    r_table_gripper = np.array([[c, s, 0.0],
                                [s, -c, 0.0],
                                [0.0, 0.0, -1.0]])
    z_grasp = box.top_z - min(cand.rect.h / 2, box.height / 2)
    t = np.array([cand.rect.x, cand.rect.y, z_grasp])
    pose_table = RigidTransform(matrix_to_quat(r_table_gripper), t,
                                FrameId.TABLE, FrameId.GRIPPER)
    pose = table_to_base.compose(pose_table)
    approach = pose.rotation_matrix[:, 2]
    return GraspPose6D(pose, cand.rect.w, approach / np.linalg.norm(approach))
