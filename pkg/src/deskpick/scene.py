"""Synthetic tabletop world: parametric objects, ground-truth registry, and
ray-cast depth + label rendering standing in for the RGB-D sensor.

Objects are unions of up to three primitives (box, vertical cylinder,
sphere) posed on the table plane. The rendered label image carries object
ids (0 = background, 1 = table, object ids start at 2) plus an id-to-class
legend so the detector oracle can stand in for a learned detector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import footprints
from .errors import SimError
from .geometry import FrameId, PinholeCamera, RigidTransform, quat_from_axis_angle

OBJECT_CLASSES = ("stapler", "spoon", "banana", "screw driver", "bowl",
                  "ball", "sunglasses", "pliers", "scissor", "tape")

SCENE_SCHEMA_VERSION = 1

BACKGROUND_ID = 0
TABLE_ID = 1
FIRST_OBJECT_ID = 2

_Z_AXIS = np.array([0.0, 0.0, 1.0])


class PlacementError(SimError):
    """Rejection sampling could not place all objects disjointly."""


class UnknownObjectError(SimError):
    """Scene operation referenced a nonexistent object id."""


# --------------------------------------------------------------------------
# primitives and objects
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Primitive:
    """One solid primitive in object-local coordinates.

    kind: 'box' (dims w, d, h), 'cylinder' (dims r, h; axis +z), or
    'sphere' (dims r). ``offset`` positions the primitive center; ``yaw``
    rotates it about +z.
    """

    kind: str
    dims: tuple[float, ...]
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self) -> None:
        expected = {"box": 3, "cylinder": 2, "sphere": 1}
        if self.kind not in expected:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if len(self.dims) != expected[self.kind]:
            raise ValueError(f"{self.kind} expects {expected[self.kind]} dims")
        if any(d <= 0 for d in self.dims):
            raise ValueError("primitive dimensions must be positive")

    @property
    def half_height(self) -> float:
        if self.kind == "box":
            return self.dims[2] / 2
        if self.kind == "cylinder":
            return self.dims[1] / 2
        return self.dims[0]

    @property
    def bottom_z(self) -> float:
        return self.offset[2] - self.half_height

    @property
    def top_z(self) -> float:
        return self.offset[2] + self.half_height

    def footprint_local(self) -> np.ndarray:
        """Footprint polygon in object-local coordinates."""
        ox, oy = self.offset[0], self.offset[1]
        if self.kind == "box":
            return footprints.oriented_rect(ox, oy, self.dims[0], self.dims[1],
                                            self.yaw)
        return footprints.circle_polygon(ox, oy, self.dims[0])


@dataclass(frozen=True)
class SceneObject:
    id: int
    class_label: str
    primitives: tuple[Primitive, ...]
    pose: RigidTransform  # Table <- object
    grasp_width: float

    def __post_init__(self) -> None:
        if self.id < FIRST_OBJECT_ID:
            raise ValueError(f"object ids start at {FIRST_OBJECT_ID}")
        if self.class_label not in OBJECT_CLASSES:
            raise ValueError(f"unknown class {self.class_label!r}")
        if not self.primitives:
            raise ValueError("object needs at least one primitive")
        if self.grasp_width <= 0:
            raise ValueError("grasp width must be positive")
        if self.pose.parent_frame is not FrameId.TABLE:
            raise ValueError("object pose must be expressed in the table frame")

    @property
    def height(self) -> float:
        return max(p.top_z for p in self.primitives)

    def min_z(self) -> float:
        """Lowest point over all primitives, in table coordinates.

        Valid for the upright poses used here (rotation about z only).
        """
        return min(p.bottom_z for p in self.primitives) + float(self.pose.translation[2])

    def footprint(self) -> np.ndarray:
        """Convex hull footprint in the table frame."""
        corners = np.vstack([p.footprint_local() for p in self.primitives])
        world = self.pose.apply(np.column_stack([corners, np.zeros(len(corners))]))
        return footprints.convex_hull(world[:, :2])

    def yaw(self) -> float:
        x_axis = self.pose.rotate(np.array([1.0, 0.0, 0.0]))
        return math.atan2(x_axis[1], x_axis[0])


def upright_pose(x: float, y: float, yaw: float, z: float = 0.0) -> RigidTransform:
    """Table <- object pose resting flat with a rotation about +z."""
    return RigidTransform(quat_from_axis_angle(_Z_AXIS, yaw),
                          np.array([x, y, z]), FrameId.TABLE, FrameId.OBJECT)


# --------------------------------------------------------------------------
# object catalog
# --------------------------------------------------------------------------
# Shapes stand in geometrically for the ten evaluation objects; each entry
# rests with its lowest point exactly at z = 0, keeps its local origin at
# the footprint bounding-box center, and keeps the minor footprint extent
# narrow enough for a parallel gripper.

def _b(w, d, h, dx=0.0, dy=0.0, yaw=0.0):
    return Primitive("box", (w, d, h), (dx, dy, h / 2), yaw)


def _cyl(r, h, dx=0.0, dy=0.0):
    return Primitive("cylinder", (r, h), (dx, dy, h / 2))


def _sph(r, dx=0.0, dy=0.0):
    return Primitive("sphere", (r,), (dx, dy, r))


CATALOG: dict[str, tuple[tuple[Primitive, ...], float]] = {
    "stapler": ((_b(0.045, 0.18, 0.035),), 0.045),
    "spoon": ((_b(0.022, 0.11, 0.012, dy=-0.016), _cyl(0.018, 0.012, dy=0.053)),
              0.022),
    "banana": ((_b(0.035, 0.19, 0.035),), 0.035),
    "screw driver": ((_b(0.03, 0.09, 0.026, dy=-0.06),
                      _b(0.014, 0.12, 0.018, dy=0.045)), 0.03),
    # Grasp widths follow the footprint-polygon convention (circles are
    # regular 24-gons, so their minor extent sits just under the diameter).
    "bowl": ((_cyl(0.04, 0.05),), 0.079),
    "ball": ((_sph(0.03),), 0.059),
    "sunglasses": ((_b(0.13, 0.016, 0.030, dy=0.009),
                    _b(0.11, 0.02, 0.026, dx=-0.008, dy=-0.007)), 0.034),
    "pliers": ((_b(0.018, 0.16, 0.014, yaw=0.12),
                _b(0.018, 0.16, 0.014, yaw=-0.12)), 0.036),
    "scissor": ((_b(0.014, 0.14, 0.01, yaw=0.10),
                 _b(0.014, 0.14, 0.01, yaw=-0.10)), 0.027),
    "tape": ((_cyl(0.04, 0.025),), 0.079),
}


def make_object(object_id: int, class_label: str, x: float, y: float,
                yaw: float) -> SceneObject:
    try:
        primitives, grasp_width = CATALOG[class_label]
    except KeyError:
        raise ValueError(f"unknown class {class_label!r}") from None
    return SceneObject(object_id, class_label, primitives,
                       upright_pose(x, y, yaw), grasp_width)


# --------------------------------------------------------------------------
# scene
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in the table plane, meters."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if self.min_x >= self.max_x or self.min_y >= self.max_y:
            raise ValueError("degenerate rectangle")

    def contains_point(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def contains_polygon(self, poly: np.ndarray) -> bool:
        return bool(np.all((poly[:, 0] >= self.min_x) & (poly[:, 0] <= self.max_x)
                           & (poly[:, 1] >= self.min_y) & (poly[:, 1] <= self.max_y)))

    def as_polygon(self) -> np.ndarray:
        return np.array([[self.min_x, self.min_y], [self.max_x, self.min_y],
                         [self.max_x, self.max_y], [self.min_x, self.max_y]])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.min_x, self.min_y, self.max_x, self.max_y)


DEFAULT_TABLE_EXTENT = Rect(-0.30, -0.20, 0.30, 0.20)
DEFAULT_REACHABLE_REGION = Rect(-0.24, -0.15, 0.24, 0.15)


@dataclass(frozen=True)
class Scene:
    objects: tuple[SceneObject, ...]
    table_extent: Rect = DEFAULT_TABLE_EXTENT
    reachable_region: Rect = DEFAULT_REACHABLE_REGION
    rng_seed: int = 0
    off_table: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids")
        for o in self.objects:
            if abs(o.min_z()) > 1e-6 and o.id not in self.off_table:
                raise ValueError(f"object {o.id} does not rest on the table")

    def object_by_id(self, object_id: int) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise UnknownObjectError(f"no object with id {object_id}")

    def visible_objects(self) -> tuple[SceneObject, ...]:
        return self.objects


def spawn_scene(seed: int, classes: list[str],
                table_extent: Rect = DEFAULT_TABLE_EXTENT,
                reachable_region: Rect = DEFAULT_REACHABLE_REGION,
                max_attempts: int = 200) -> Scene:
    """Place one object per class at random disjoint poses inside the
    reachable region. Deterministic for a fixed seed."""
    for c in classes:
        if c not in OBJECT_CLASSES:
            raise ValueError(f"unknown class {c!r}")
    rng = np.random.default_rng(seed)
    placed: list[SceneObject] = []
    placed_polys: list[np.ndarray] = []
    next_id = FIRST_OBJECT_ID
    for class_label in classes:
        ok = False
        for _ in range(max_attempts):
            x = rng.uniform(reachable_region.min_x, reachable_region.max_x)
            y = rng.uniform(reachable_region.min_y, reachable_region.max_y)
            yaw = rng.uniform(-math.pi, math.pi)
            candidate = make_object(next_id, class_label, x, y, yaw)
            poly = candidate.footprint()
            if not reachable_region.contains_polygon(poly):
                continue
            if any(footprints.polygons_intersect(poly, q) for q in placed_polys):
                continue
            placed.append(candidate)
            placed_polys.append(poly)
            next_id += 1
            ok = True
            break
        if not ok:
            raise PlacementError(
                f"could not place {class_label!r} after {max_attempts} attempts")
    return Scene(tuple(placed), table_extent, reachable_region, seed)


def apply_motion(scene: Scene, object_id: int, new_pose: RigidTransform) -> Scene:
    """Return a scene with one object re-posed; flags off-table placements."""
    moved = scene.object_by_id(object_id)  # raises UnknownObjectError
    new_obj = replace(moved, pose=new_pose)
    off = set(scene.off_table)
    if scene.table_extent.contains_polygon(new_obj.footprint()):
        off.discard(object_id)
    else:
        off.add(object_id)
    objects = tuple(new_obj if o.id == object_id else o for o in scene.objects)
    return replace(scene, objects=objects, off_table=frozenset(off))


# --------------------------------------------------------------------------
# depth rendering
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DepthImage:
    width: int
    height: int
    depth: np.ndarray  # (H, W) float64 meters, 0.0 = no return
    labels: np.ndarray  # (H, W) int32 object ids
    id_to_class: dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.depth.shape != (self.height, self.width):
            raise ValueError("depth shape mismatch")
        if self.labels.shape != (self.height, self.width):
            raise ValueError("labels shape mismatch")
        if not np.all(np.isfinite(self.depth)) or np.any(self.depth < 0):
            raise ValueError("depth must be finite and non-negative")


def _ray_box(origin: np.ndarray, dirs: np.ndarray, dims: tuple) -> np.ndarray:
    """Slab test against a box of half-sides dims/2 centered at the origin.

    origin (3,), dirs (N, 3). Returns per-ray hit parameter t, inf on miss.
    """
    half = np.array([dims[0] / 2, dims[1] / 2, dims[2] / 2])
    t_lo = np.full(dirs.shape[0], -np.inf)
    t_hi = np.full(dirs.shape[0], np.inf)
    miss = np.zeros(dirs.shape[0], dtype=bool)
    for k in range(3):
        d = dirs[:, k]
        o = origin[k]
        parallel = np.abs(d) < 1e-15
        miss |= parallel & (np.abs(o) > half[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half[k] - o) / d
            t2 = (half[k] - o) / d
        near = np.where(parallel, -np.inf, np.minimum(t1, t2))
        far = np.where(parallel, np.inf, np.maximum(t1, t2))
        t_lo = np.maximum(t_lo, near)
        t_hi = np.minimum(t_hi, far)
    t = np.where((~miss) & (t_hi >= t_lo) & (t_hi > 0),
                 np.where(t_lo > 0, t_lo, t_hi), np.inf)
    return t


def _ray_sphere(origin: np.ndarray, dirs: np.ndarray, radius: float) -> np.ndarray:
    b = dirs @ origin
    a = (dirs ** 2).sum(axis=1)
    c = origin @ origin - radius * radius
    disc = b * b - a * c
    t = np.full(dirs.shape[0], np.inf)
    hit = disc >= 0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - sq) / a
    t2 = (-b + sq) / a
    t_near = np.where(t1 > 0, t1, np.where(t2 > 0, t2, np.inf))
    t[hit] = t_near[hit]
    return t


def _ray_cylinder(origin: np.ndarray, dirs: np.ndarray, radius: float,
                  height: float) -> np.ndarray:
    """Finite vertical cylinder centered at origin: side wall plus caps."""
    hz = height / 2.0
    ox, oy, oz = origin
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    best = np.full(dirs.shape[0], np.inf)

    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - radius * radius
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / a
            z = oz + t * dz
            valid = (disc >= 0) & (a > 1e-15) & (t > 0) & (np.abs(z) <= hz)
            best = np.where(valid & (t < best), t, best)

        for cap in (-hz, hz):
            t = (cap - oz) / dz
            x = ox + t * dx
            y = oy + t * dy
            valid = (np.abs(dz) > 1e-15) & (t > 0) & (x * x + y * y <= radius * radius)
            best = np.where(valid & (t < best), t, best)
    return best


def _primitive_hits(prim: Primitive, obj_pose: RigidTransform,
                    origin_table: np.ndarray, dirs_table: np.ndarray) -> np.ndarray:
    local = RigidTransform(quat_from_axis_angle(_Z_AXIS, prim.yaw),
                           np.array(prim.offset), FrameId.OBJECT, FrameId.OBJECT)
    prim_from_table = obj_pose.compose(local).invert()
    o = prim_from_table.apply(origin_table)
    d = prim_from_table.rotate(dirs_table)
    if prim.kind == "box":
        return _ray_box(o, d, prim.dims)
    if prim.kind == "sphere":
        return _ray_sphere(o, d, prim.dims[0])
    return _ray_cylinder(o, d, prim.dims[0], prim.dims[1])


def render(scene: Scene, cam_pose: RigidTransform, cam: PinholeCamera) -> DepthImage:
    """Ray-cast depth + label image. Depth is the camera-frame z coordinate
    of the nearest hit; misses produce depth 0.0 and the background label."""
    table_from_cam = cam_pose.invert()
    origin = table_from_cam.translation
    us, vs = np.meshgrid(np.arange(cam.width, dtype=float),
                         np.arange(cam.height, dtype=float))
    dirs_cam = cam.ray_directions(us.ravel(), vs.ravel())
    dirs_table = table_from_cam.rotate(dirs_cam)

    n = dirs_table.shape[0]
    best_t = np.full(n, np.inf)
    best_label = np.zeros(n, dtype=np.int32)

    # Table surface: z = 0 plane clipped to the table extent.
    dz = dirs_table[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = -origin[2] / dz
    px = origin[0] + t_plane * dirs_table[:, 0]
    py = origin[1] + t_plane * dirs_table[:, 1]
    ext = scene.table_extent
    plane_hit = (np.abs(dz) > 1e-15) & (t_plane > 0) & \
                (px >= ext.min_x) & (px <= ext.max_x) & \
                (py >= ext.min_y) & (py <= ext.max_y)
    best_t = np.where(plane_hit, t_plane, best_t)
    best_label = np.where(plane_hit, TABLE_ID, best_label).astype(np.int32)

    for obj in scene.objects:
        for prim in obj.primitives:
            t = _primitive_hits(prim, obj.pose, origin, dirs_table)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            best_label = np.where(closer, obj.id, best_label).astype(np.int32)

    # Ray parameter equals camera-frame z because ray directions have unit
    # camera z; misses become 0.0.
    depth = np.where(np.isfinite(best_t), best_t, 0.0).reshape(cam.height, cam.width)
    labels = best_label.reshape(cam.height, cam.width)
    legend = {o.id: o.class_label for o in scene.objects}
    return DepthImage(cam.width, cam.height, depth, labels, legend)


# --------------------------------------------------------------------------
# serialization (versioned, human-readable)
# --------------------------------------------------------------------------

def _pose_to_doc(pose: RigidTransform) -> dict:
    return {"quat_wxyz": [float(v) for v in pose.rotation],
            "translation": [float(v) for v in pose.translation]}


def _pose_from_doc(doc: dict) -> RigidTransform:
    return RigidTransform(np.array(doc["quat_wxyz"], dtype=float),
                          np.array(doc["translation"], dtype=float),
                          FrameId.TABLE, FrameId.OBJECT)


def scene_to_doc(scene: Scene) -> dict:
    return {
        "schema_version": SCENE_SCHEMA_VERSION,
        "rng_seed": scene.rng_seed,
        "table_extent": list(scene.table_extent.as_tuple()),
        "reachable_region": list(scene.reachable_region.as_tuple()),
        "off_table": sorted(scene.off_table),
        "objects": [
            {
                "id": o.id,
                "class_label": o.class_label,
                "grasp_width": o.grasp_width,
                "pose": _pose_to_doc(o.pose),
                "primitives": [
                    {"kind": p.kind, "dims": list(p.dims),
                     "offset": list(p.offset), "yaw": p.yaw}
                    for p in o.primitives
                ],
            }
            for o in scene.objects
        ],
    }


def scene_from_doc(doc: dict) -> Scene:
    version = doc.get("schema_version")
    if version != SCENE_SCHEMA_VERSION:
        raise ValueError(f"unsupported scene schema version {version!r}")
    objects = tuple(
        SceneObject(
            id=entry["id"],
            class_label=entry["class_label"],
            primitives=tuple(Primitive(p["kind"], tuple(p["dims"]),
                                       tuple(p["offset"]), p["yaw"])
                             for p in entry["primitives"]),
            pose=_pose_from_doc(entry["pose"]),
            grasp_width=entry["grasp_width"],
        )
        for entry in doc["objects"]
    )
    return Scene(objects,
                 Rect(*doc["table_extent"]),
                 Rect(*doc["reachable_region"]),
                 doc["rng_seed"],
                 frozenset(doc.get("off_table", [])))


def scene_to_text(scene: Scene) -> str:
    return json.dumps(scene_to_doc(scene), indent=2, sort_keys=True) + "\n"


def scene_from_text(text: str) -> Scene:
    return scene_from_doc(json.loads(text))
