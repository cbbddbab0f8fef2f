"""Object localization pipeline: detection interface with a geometric
oracle behind it, ROI point-cloud cropping, table-plane removal,
region-growing segmentation with largest-cluster denoising, and 3D
bounding-box fitting.

The detector consumes the rendered label image (which carries the
information a learned detector would produce) and can corrupt its output
through a configurable noise model: bounding-box jitter, dropped
detections, and class confusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import SimError
from .geometry import (
    FrameId,
    PinholeCamera,
    RigidTransform,
    backproject_pixels,
    wrap_orientation,
)
from .scene import FIRST_OBJECT_ID, OBJECT_CLASSES, DepthImage


class EmptyCropError(SimError):
    """Crop region contained no valid-depth pixels."""


class EmptyCloudError(SimError):
    """Operation requires a non-empty point cloud."""


class DegenerateClusterError(SimError):
    """Cluster too small or collinear for box fitting."""


@dataclass(frozen=True)
class Detection2D:
    """One 2D detection. ``bbox`` is (u_min, v_min, u_max, v_max) in
    inclusive pixel indices. ``object_id`` identifies the underlying blob;
    the class label may be wrong under confusion noise."""

    class_label: str
    bbox: tuple[int, int, int, int]
    confidence: float
    object_id: int

    def __post_init__(self) -> None:
        u0, v0, u1, v1 = self.bbox
        if u1 < u0 or v1 < v0:
            raise ValueError("empty bbox")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence outside [0, 1]")


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, 3) meters
    frame: FrameId

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Box3D:
    """Upright oriented bounding box in the table frame."""

    center: np.ndarray  # (3,)
    half_extents: np.ndarray  # (3,) along (yaw axis, perpendicular, z)
    yaw: float  # radians in (-pi/2, pi/2]

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=float).reshape(3)
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise ValueError("half extents must be positive")
        if not (-math.pi / 2 < self.yaw <= math.pi / 2 + 1e-12):
            raise ValueError("yaw outside (-pi/2, pi/2]")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)

    @property
    def top_z(self) -> float:
        return float(self.center[2] + self.half_extents[2])

    @property
    def height(self) -> float:
        return float(2 * self.half_extents[2])

    def footprint_width_along(self, theta: float) -> float:
        """Width of the box footprint measured along direction ``theta``."""
        d = theta - self.yaw
        return float(2 * (self.half_extents[0] * abs(math.cos(d))
                          + self.half_extents[1] * abs(math.sin(d))))

    @property
    def long_axis_yaw(self) -> float:
        """Orientation of the longer footprint side in (-pi/2, pi/2]."""
        if self.half_extents[0] >= self.half_extents[1]:
            return self.yaw
        return wrap_orientation(self.yaw + math.pi / 2)


@dataclass(frozen=True)
class NoiseConfig:
    """Perception corruption model; all-zero rates mean the exact oracle."""

    bbox_jitter_px: float = 0.0
    miss_rate: float = 0.0
    confusion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bbox_jitter_px < 0:
            raise ValueError("jitter must be non-negative")
        for r in (self.miss_rate, self.confusion_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")

    @property
    def is_zero(self) -> bool:
        return (self.bbox_jitter_px == 0.0 and self.miss_rate == 0.0
                and self.confusion_rate == 0.0)


ZERO_NOISE = NoiseConfig()


def detect(image: DepthImage, noise: NoiseConfig = ZERO_NOISE) -> list[Detection2D]:
    """One detection per visible object, tight label-image bbox, confidence
    1.0 -- optionally corrupted by the noise model. Deterministic for a
    fixed noise seed."""
    rng = np.random.default_rng(noise.seed)
    out: list[Detection2D] = []
    ids = sorted(int(i) for i in np.unique(image.labels) if i >= FIRST_OBJECT_ID)
    for object_id in ids:
        vs, us = np.nonzero(image.labels == object_id)
        bbox = (int(us.min()), int(vs.min()), int(us.max()), int(vs.max()))
        label = image.id_to_class.get(object_id, OBJECT_CLASSES[0])
        confidence = 1.0
        if not noise.is_zero:
            if rng.uniform() < noise.miss_rate:
                continue
            if noise.bbox_jitter_px > 0:
                jit = rng.normal(0.0, noise.bbox_jitter_px, size=4)
                u0 = int(np.clip(round(bbox[0] + jit[0]), 0, image.width - 1))
                v0 = int(np.clip(round(bbox[1] + jit[1]), 0, image.height - 1))
                u1 = int(np.clip(round(bbox[2] + jit[2]), u0, image.width - 1))
                v1 = int(np.clip(round(bbox[3] + jit[3]), v0, image.height - 1))
                bbox = (u0, v0, u1, v1)
            if noise.confusion_rate > 0 and rng.uniform() < noise.confusion_rate:
                others = [c for c in OBJECT_CLASSES if c != label]
                label = others[int(rng.integers(len(others)))]
            confidence = float(rng.uniform(0.6, 1.0))
        out.append(Detection2D(label, bbox, confidence, object_id))
    return out


def crop_cloud(image: DepthImage, cam: PinholeCamera, cam_pose: RigidTransform,
               bbox: tuple[int, int, int, int]) -> PointCloud:
    """Back-project every valid-depth pixel inside ``bbox`` into the table
    frame. Points keep row-major pixel scan order."""
    u0, v0, u1, v1 = bbox
    if not (0 <= u0 <= u1 < image.width and 0 <= v0 <= v1 < image.height):
        raise ValueError(f"bbox {bbox} outside {image.width}x{image.height} image")
    sub = image.depth[v0:v1 + 1, u0:u1 + 1]
    vs, us = np.nonzero(sub > 0)
    if len(vs) == 0:
        raise EmptyCropError("no valid depth inside bbox")
    depths = sub[vs, us]
    pts_cam = backproject_pixels(cam, us + u0, vs + v0, depths)
    table_from_cam = cam_pose.invert()
    return PointCloud(table_from_cam.apply(pts_cam), FrameId.TABLE)


def remove_plane(cloud: PointCloud, z_tol: float) -> PointCloud:
    """Drop points within ``z_tol`` of the table plane; order preserved."""
    if cloud.frame is not FrameId.TABLE:
        raise ValueError("plane removal expects a table-frame cloud")
    return PointCloud(cloud.points[cloud.points[:, 2] > z_tol], FrameId.TABLE)


def region_grow(cloud: PointCloud, radius: float) -> PointCloud:
    """Largest connected component of the radius-neighbor graph (neighbors
    iff distance <= radius). Ties go to the component holding the lowest
    point index; output keeps the original point order."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = len(cloud)
    if n == 0:
        raise EmptyCloudError("region growing on an empty cloud")
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    tree = cKDTree(cloud.points)
    for i, j in tree.query_pairs(radius):
        union(i, j)

    roots = np.fromiter((find(i) for i in range(n)), dtype=int, count=n)
    counts: dict[int, int] = {}
    for r in roots:
        counts[r] = counts.get(r, 0) + 1
    # Max cardinality; tie-break by the smallest root, which equals the
    # lowest minimum point index because union always keeps the lower root.
    best = min(counts, key=lambda r: (-counts[r], r))
    return PointCloud(cloud.points[roots == best], cloud.frame)


def fit_box3(cluster: PointCloud) -> Box3D:
    """Upright bounding box via planar PCA with min/max extents.

    The fitted yaw is the principal direction of the footprint unless the
    axis-aligned box has no larger area, in which case yaw 0 wins (this
    also resolves symmetric clusters deterministically).
    """
    pts = cluster.points
    if len(pts) < 3:
        raise DegenerateClusterError("need at least 3 points")
    xy = pts[:, :2]
    centered = xy - xy.mean(axis=0)
    cov = centered.T @ centered / len(xy)
    eigvals, eigvecs = np.linalg.eigh(cov)
    principal = eigvecs[:, int(np.argmax(eigvals))]
    yaw = wrap_orientation(math.atan2(principal[1], principal[0]))

    def extents_at(theta: float):
        u = np.array([math.cos(theta), math.sin(theta)])
        v = np.array([-math.sin(theta), math.cos(theta)])
        pu = xy @ u
        pv = xy @ v
        return (pu.min(), pu.max(), pv.min(), pv.max())

    lo_u, hi_u, lo_v, hi_v = extents_at(yaw)
    area_pca = (hi_u - lo_u) * (hi_v - lo_v)
    lo_x, hi_x, lo_y, hi_y = extents_at(0.0)
    area_aab = (hi_x - lo_x) * (hi_y - lo_y)
    # Near-isotropic clusters have no meaningful principal direction, and a
    # strictly smaller axis-aligned box always wins; either way yaw 0 keeps
    # the result deterministic and no larger than the axis-aligned box.
    isotropic = eigvals[-1] - eigvals[0] <= 1e-9 * max(eigvals[-1], 1e-30)
    if isotropic or area_aab < area_pca * (1 - 1e-9):
        yaw = 0.0
        lo_u, hi_u, lo_v, hi_v = lo_x, hi_x, lo_y, hi_y

    he_u = (hi_u - lo_u) / 2
    he_v = (hi_v - lo_v) / 2
    if min(he_u, he_v) < 1e-9:
        raise DegenerateClusterError("cluster is collinear in the table plane")
    z_lo = float(pts[:, 2].min())
    z_hi = float(pts[:, 2].max())
    he_z = max((z_hi - z_lo) / 2, 1e-6)

    u = np.array([math.cos(yaw), math.sin(yaw)])
    v = np.array([-math.sin(yaw), math.cos(yaw)])
    center_xy = u * (lo_u + hi_u) / 2 + v * (lo_v + hi_v) / 2
    center = np.array([center_xy[0], center_xy[1], (z_lo + z_hi) / 2])
    return Box3D(center, np.array([he_u, he_v, he_z]), yaw)


@dataclass(frozen=True)
class LocalizedObject:
    detection: Detection2D
    box: Box3D


def localize(image: DepthImage, cam: PinholeCamera, cam_pose: RigidTransform,
             detection: Detection2D, plane_tol: float = 0.005,
             cluster_radius: float = 0.01) -> Box3D:
    """Full §-style localization for one detection: crop, plane removal,
    largest-cluster denoising, box fit."""
    cloud = crop_cloud(image, cam, cam_pose, detection.bbox)
    elevated = remove_plane(cloud, plane_tol)
    if len(elevated) == 0:
        raise EmptyCloudError("nothing above the table inside the bbox")
    cluster = region_grow(elevated, cluster_radius)
    return fit_box3(cluster)
