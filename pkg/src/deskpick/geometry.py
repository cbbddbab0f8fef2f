"""Rigid-body transforms, coordinate frames, pinhole camera, fiducial calibration.

Conventions used throughout:

* Quaternions are stored ``[w, x, y, z]`` and renormalized after every
  construction and composition.
* A ``RigidTransform`` with parent frame ``P`` and child frame ``C`` maps
  point coordinates expressed in ``C`` into ``P``: ``p_P = R @ p_C + t``.
* The camera frame is right-handed with x right, y down, z forward (optical
  axis). Pixel u grows with camera x, pixel v with camera y.
* The table frame is the fiducial frame: origin at the marker center, z up,
  table surface at z = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import SimError


class FrameMismatchError(SimError):
    """Transform composition attempted across non-chaining frames."""


class InvalidDepthError(SimError):
    """Back-projection asked for a non-positive or non-finite depth."""


class DegenerateCornersError(SimError):
    """Fiducial corners are collinear or otherwise unusable."""


class BehindCameraError(SimError):
    """Geometry lies behind the camera plane (z <= 0)."""


class FrameId(enum.Enum):
    CAMERA = "camera"
    TABLE = "table"
    ROBOT_BASE = "robot_base"
    GRIPPER = "gripper"
    # Generic tag for object-local and other auxiliary frames.
    OBJECT = "object"


# --------------------------------------------------------------------------
# quaternion helpers ([w, x, y, z])
# --------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if not math.isfinite(n) or n < 1e-12:
        raise ValueError(f"cannot normalize quaternion with norm {n}")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v (shape (3,) or (N, 3)) by quaternion q."""
    return np.asarray(v, dtype=float) @ quat_to_matrix(q).T


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to quaternion, numerically stable branch selection."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("zero rotation axis")
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) * axis / n))


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    rv = np.asarray(rv, dtype=float)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-12:
        return np.array([1.0, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2]]) / math.sqrt(
            1.0 + 0.25 * angle * angle)
    return quat_from_axis_angle(rv, angle)


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    q = quat_normalize(q)
    if q[0] < 0:
        q = -q
    sin_half = float(np.linalg.norm(q[1:]))
    if sin_half < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * math.atan2(sin_half, q[0])
    return q[1:] / sin_half * angle


def rotation_angle_between(qa: np.ndarray, qb: np.ndarray) -> float:
    """Angle in radians of the relative rotation between two quaternions."""
    return float(np.linalg.norm(quat_to_rotvec(quat_mul(quat_conj(qa), qb))))


def rotvec_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos = (m[0, 0] + m[1, 1] + m[2, 2] - 1.0) / 2.0
    cos = min(1.0, max(-1.0, cos))
    angle = math.acos(cos)
    skew = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    if angle < 1e-8:
        return skew / 2.0
    if angle > math.pi - 1e-6:
        return quat_to_rotvec(matrix_to_quat(m))
    return skew * (angle / (2.0 * math.sin(angle)))


def wrap_orientation(theta: float) -> float:
    """Wrap an undirected planar orientation into (-pi/2, pi/2]."""
    t = theta % math.pi
    if t > math.pi / 2:
        t -= math.pi
    return t


# --------------------------------------------------------------------------
# rigid transforms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidTransform:
    """Pose of ``child_frame`` expressed in ``parent_frame``.

    Maps point coordinates from the child frame into the parent frame.
    """

    rotation: np.ndarray  # quaternion [w, x, y, z], unit norm
    translation: np.ndarray  # meters, shape (3,)
    parent_frame: FrameId
    child_frame: FrameId

    def __post_init__(self) -> None:
        q = quat_normalize(self.rotation)
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError("non-finite translation")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity(parent: FrameId, child: FrameId) -> "RigidTransform":
        return RigidTransform(np.array([1.0, 0, 0, 0]), np.zeros(3), parent, child)

    @staticmethod
    def from_matrix(m: np.ndarray, parent: FrameId, child: FrameId) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return RigidTransform(matrix_to_quat(m[:3, :3]), m[:3, 3], parent, child)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """T_pc = T_pm . T_mc. Frames must chain: self.child == other.parent."""
        if self.child_frame is not other.parent_frame:
            raise FrameMismatchError(
                f"cannot compose {self.parent_frame.value}<-{self.child_frame.value} "
                f"with {other.parent_frame.value}<-{other.child_frame.value}")
        q = quat_mul(self.rotation, other.rotation)
        t = self.apply(other.translation)
        return RigidTransform(q, t, self.parent_frame, other.child_frame)

    def invert(self) -> "RigidTransform":
        qc = quat_conj(self.rotation)
        return RigidTransform(qc, -quat_rotate(qc, self.translation),
                              self.child_frame, self.parent_frame)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform point(s) (3,) or (N, 3) from child to parent coordinates."""
        pts = np.asarray(points, dtype=float)
        return quat_rotate(self.rotation, pts) + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate direction vector(s); no translation."""
        return quat_rotate(self.rotation, vectors)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def invert(t: RigidTransform) -> RigidTransform:
    return t.invert()


# --------------------------------------------------------------------------
# pinhole camera
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")

    def in_bounds(self, u: float, v: float) -> bool:
        return 0 <= u < self.width and 0 <= v < self.height

    def project(self, points_cam: np.ndarray) -> np.ndarray:
        """Project camera-frame point(s) to pixel coordinates (u, v).

        Raises BehindCameraError if any point has z <= 0.
        """
        pts = np.atleast_2d(np.asarray(points_cam, dtype=float))
        z = pts[:, 2]
        if np.any(z <= 0):
            raise BehindCameraError("point at or behind the camera plane")
        uv = np.stack([self.fx * pts[:, 0] / z + self.cx,
                       self.fy * pts[:, 1] / z + self.cy], axis=1)
        return uv[0] if np.asarray(points_cam).ndim == 1 else uv

    def backproject(self, pixel: tuple[float, float], depth: float) -> np.ndarray:
        """Lift a pixel at a given depth (camera-frame z, meters) to 3D."""
        u, v = pixel
        if not (math.isfinite(depth) and depth > 0):
            raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
        if not self.in_bounds(u, v):
            raise ValueError(f"pixel ({u}, {v}) outside {self.width}x{self.height} image")
        return np.array([(u - self.cx) * depth / self.fx,
                         (v - self.cy) * depth / self.fy,
                         depth])

    def ray_directions(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Camera-frame ray directions with unit z for pixel arrays."""
        return np.stack([(us - self.cx) / self.fx,
                         (vs - self.cy) / self.fy,
                         np.ones_like(us, dtype=float)], axis=-1)


def backproject_pixels(cam: PinholeCamera, us: np.ndarray, vs: np.ndarray,
                       depths: np.ndarray) -> np.ndarray:
    """Vectorized backprojection of many pixels; depths are camera-frame z."""
    return np.stack([(us - cam.cx) * depths / cam.fx,
                     (vs - cam.cy) * depths / cam.fy,
                     depths], axis=-1)


def look_at_pose(position: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Camera pose (Camera <- Table) for a camera at ``position`` looking at
    ``target``, both in table coordinates.

    Camera x is chosen horizontal (perpendicular to world z) when possible;
    for a straight-down view camera x aligns with table x.
    """
    position = np.asarray(position, dtype=float)
    target = np.asarray(target, dtype=float)
    forward = target - position
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("camera position equals look-at target")
    z_c = forward / n
    x_c = np.cross(z_c, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(x_c) < 1e-9:
        x_c = np.array([1.0, 0.0, 0.0])
    else:
        x_c = x_c / np.linalg.norm(x_c)
    y_c = np.cross(z_c, x_c)
    r_table_cam = np.stack([x_c, y_c, z_c], axis=1)
    table_from_cam = RigidTransform(matrix_to_quat(r_table_cam), position,
                                    FrameId.TABLE, FrameId.CAMERA)
    return table_from_cam.invert()


# --------------------------------------------------------------------------
# fiducial calibration
# --------------------------------------------------------------------------

def marker_corners_table(marker_side: float) -> np.ndarray:
    """Marker corner coordinates in the table frame, z = 0.

    Order: top-left, top-right, bottom-right, bottom-left as seen looking
    down the table +z axis with table +y up.
    """
    h = marker_side / 2.0
    return np.array([[-h, h, 0.0], [h, h, 0.0], [h, -h, 0.0], [-h, -h, 0.0]])


def _homography_dlt(src_xy: np.ndarray, dst_uv: np.ndarray) -> np.ndarray:
    """Direct linear transform homography from 4+ correspondences."""
    rows = []
    for (x, y), (u, v) in zip(src_xy, dst_uv):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    a = np.asarray(rows, dtype=float)
    _, _, vt = np.linalg.svd(a)
    h = vt[-1].reshape(3, 3)
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]
    return h


def estimate_fiducial_pose(corners: np.ndarray, marker_side: float,
                           cam: PinholeCamera) -> RigidTransform:
    """Recover the Camera <- Table pose from 4 observed marker corner pixels.

    ``corners`` is (4, 2) in the order given by ``marker_corners_table``.
    Homography initialization followed by iterative reprojection refinement.
    """
    corners = np.asarray(corners, dtype=float).reshape(4, 2)
    if marker_side <= 0:
        raise ValueError("marker side must be positive")

    # Collinearity check: every corner triple must span nonzero area.
    c = corners - corners.mean(axis=0)
    cross_max = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            cross_max = max(cross_max, abs(c[i, 0] * c[j, 1] - c[i, 1] * c[j, 0]))
    if cross_max < 1e-6:
        raise DegenerateCornersError("marker corners are collinear")

    model = marker_corners_table(marker_side)
    h = _homography_dlt(model[:, :2], corners)
    k = np.array([[cam.fx, 0, cam.cx], [0, cam.fy, cam.cy], [0, 0, 1.0]])
    b = np.linalg.inv(k) @ h
    scale = 2.0 / (np.linalg.norm(b[:, 0]) + np.linalg.norm(b[:, 1]))
    r1 = b[:, 0] * scale
    r2 = b[:, 1] * scale
    t = b[:, 2] * scale
    if t[2] < 0:  # homography sign ambiguity: marker must be in front
        r1, r2, t = -r1, -r2, -t
    r3 = np.cross(r1, r2)
    r_approx = np.stack([r1, r2, r3], axis=1)
    u, _, vt = np.linalg.svd(r_approx)
    r = u @ np.diag([1.0, 1.0, np.linalg.det(u @ vt)]) @ vt

    if t[2] <= 0:
        raise BehindCameraError("marker resolves behind the camera")

    def residual(params: np.ndarray) -> np.ndarray:
        q = quat_from_rotvec(params[:3])
        p = quat_rotate(q, model) + params[3:]
        if np.any(p[:, 2] <= 0):
            return np.full(8, 1e6)
        uv = np.stack([cam.fx * p[:, 0] / p[:, 2] + cam.cx,
                       cam.fy * p[:, 1] / p[:, 2] + cam.cy], axis=1)
        return (uv - corners).ravel()

    x0 = np.concatenate([quat_to_rotvec(matrix_to_quat(r)), t])
    sol = least_squares(residual, x0, method="lm", xtol=1e-15, ftol=1e-15)
    q = quat_from_rotvec(sol.x[:3])
    t = sol.x[3:]
    if t[2] <= 0:
        raise BehindCameraError("refined marker pose behind the camera")
    return RigidTransform(q, t, FrameId.CAMERA, FrameId.TABLE)


# --------------------------------------------------------------------------
# ray / plane
# --------------------------------------------------------------------------

class ParallelRayError(SimError):
    """Pixel ray does not hit the table plane in front of the camera."""


def intersect_ray_table(pixel: tuple[float, float], cam: PinholeCamera,
                        cam_pose: RigidTransform) -> np.ndarray:
    """Intersect the camera ray through ``pixel`` with the table plane z = 0.

    ``cam_pose`` is Camera <- Table. Raises ParallelRayError when the ray is
    parallel to the plane or the intersection lies behind the camera.
    """
    table_from_cam = cam_pose.invert()
    origin = table_from_cam.translation
    d_cam = cam.ray_directions(np.array(pixel[0], dtype=float),
                               np.array(pixel[1], dtype=float))
    d = table_from_cam.rotate(d_cam)
    if abs(d[2]) < 1e-12:
        raise ParallelRayError("pixel ray parallel to table plane")
    t = -origin[2] / d[2]
    if t <= 0:
        raise ParallelRayError("table plane intersection behind the camera")
    return origin + t * d
