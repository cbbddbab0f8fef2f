"""Configuration loading: camera/workcell, arm, experiment, and noise files.

All configs are versioned YAML documents with units recorded in comments;
defaults ship with the package and any file can be overridden by path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import SimError
from .geometry import (
    FrameId,
    PinholeCamera,
    RigidTransform,
    look_at_pose,
    quat_from_axis_angle,
)
from .perception import NoiseConfig
from .scene import Rect


class ConfigError(SimError):
    """Config file missing, malformed, or schema-incompatible."""


def _load_yaml(path: str | Path | None, default_name: str) -> dict:
    if path is None:
        text = resources.files("deskpick.configs").joinpath(default_name).read_text()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        text = p.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path or default_name}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path or default_name} is not a mapping")
    if doc.get("schema_version") != 1:
        raise ConfigError(
            f"unsupported schema_version {doc.get('schema_version')!r} "
            f"in {path or default_name}")
    return doc


@dataclass(frozen=True)
class CameraConfig:
    camera: PinholeCamera
    position: np.ndarray
    look_at: np.ndarray
    marker_side: float

    def pose(self) -> RigidTransform:
        """Camera <- Table pose implied by the configured placement."""
        return look_at_pose(self.position, self.look_at)


def load_camera_config(path: str | Path | None = None) -> CameraConfig:
    doc = _load_yaml(path, "camera.yaml")
    try:
        cam = PinholeCamera(fx=float(doc["fx"]), fy=float(doc["fy"]),
                            cx=float(doc["cx"]), cy=float(doc["cy"]),
                            width=int(doc["width"]), height=int(doc["height"]))
        return CameraConfig(cam,
                            np.array(doc["position"], dtype=float),
                            np.array(doc["look_at"], dtype=float),
                            float(doc["marker_side"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad camera config: {exc}") from exc


@dataclass(frozen=True)
class GripperParams:
    max_opening: float
    contact_length: float
    clearance_margin: float
    max_graspable_height: float
    action_time: float

    def __post_init__(self) -> None:
        if min(self.max_opening, self.contact_length, self.clearance_margin,
               self.max_graspable_height) <= 0:
            raise ValueError("gripper dimensions must be positive")


@dataclass(frozen=True)
class ArmConfig:
    # Parsed lazily into a KinematicChain by the arm module to avoid an
    # import cycle; this holds validated raw values.
    joints: tuple[dict, ...]
    tool_offset: np.ndarray
    collision_spheres: tuple[dict, ...]
    gripper: GripperParams
    base_in_table: tuple[float, float, float]
    home_q: np.ndarray

    def table_from_base(self) -> RigidTransform:
        """Table <- RobotBase transform from the configured placement."""
        x, y, yaw = self.base_in_table
        return RigidTransform(quat_from_axis_angle([0, 0, 1], yaw),
                              np.array([x, y, 0.0]),
                              FrameId.TABLE, FrameId.ROBOT_BASE)


def load_arm_config(path: str | Path | None = None) -> ArmConfig:
    doc = _load_yaml(path, "arm.yaml")
    try:
        joints = tuple(doc["joints"])
        if len(joints) != 7:
            raise ConfigError(f"expected 7 joints, got {len(joints)}")
        for j in joints:
            if float(j["lo"]) > float(j["hi"]):
                raise ConfigError("joint limit lo > hi")
            if float(j["speed"]) <= 0:
                raise ConfigError("joint speed must be positive")
        spheres = tuple(doc["collision_spheres"])
        for s in spheres:
            if float(s["radius"]) <= 0:
                raise ConfigError("collision sphere radius must be positive")
        g = doc["gripper"]
        gripper = GripperParams(float(g["max_opening"]), float(g["contact_length"]),
                                float(g["clearance_margin"]),
                                float(g["max_graspable_height"]),
                                float(g["action_time"]))
        home_q = np.array(doc["home_q"], dtype=float)
        if home_q.shape != (7,):
            raise ConfigError("home_q must have 7 entries")
        return ArmConfig(joints, np.array(doc["tool_offset"], dtype=float),
                         spheres, gripper, tuple(doc["base_in_table"]), home_q)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad arm config: {exc}") from exc


@dataclass(frozen=True)
class PlannerParams:
    pos_tolerance: float = 0.005
    ori_tolerance: float = math.radians(2.0)
    extension_step: float = 0.1
    max_iterations: int = 50_000
    ik_attempts: int = 10
    pregrasp_offset: float = 0.10
    lift_height: float = 0.10
    release_drop: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    table_extent: Rect
    reachable_region: Rect
    plane_tolerance: float
    cluster_radius: float
    n_orientations: int
    planner: PlannerParams
    step_linear: float
    step_angular: float
    command_latency: float
    marker_latency: float
    target_distance: float
    placement_expansion: float
    trials_per_class: int


def load_experiment_config(path: str | Path | None = None) -> ExperimentConfig:
    doc = _load_yaml(path, "experiment.yaml")
    try:
        ws = doc["workspace"]
        per = doc["perception"]
        pl = doc["planner"]
        return ExperimentConfig(
            table_extent=Rect(*ws["table_extent"]),
            reachable_region=Rect(*ws["reachable_region"]),
            plane_tolerance=float(per["plane_tolerance"]),
            cluster_radius=float(per["cluster_radius"]),
            n_orientations=int(doc["grasping"]["n_orientations"]),
            planner=PlannerParams(
                pos_tolerance=float(pl["pos_tolerance"]),
                ori_tolerance=math.radians(float(pl["ori_tolerance_deg"])),
                extension_step=float(pl["extension_step"]),
                max_iterations=int(pl["max_iterations"]),
                ik_attempts=int(pl["ik_attempts"]),
                pregrasp_offset=float(pl["pregrasp_offset"]),
                lift_height=float(pl["lift_height"]),
                release_drop=float(pl["release_drop"]),
            ),
            step_linear=float(doc["jog"]["step_linear"]),
            step_angular=float(doc["jog"]["step_angular"]),
            command_latency=float(doc["timing"]["command_latency"]),
            marker_latency=float(doc["timing"]["marker_latency"]),
            target_distance=float(doc["protocol"]["target_distance"]),
            placement_expansion=float(doc["protocol"]["placement_expansion"]),
            trials_per_class=int(doc["protocol"]["trials_per_class"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc


def load_noise_config(path: str | Path | None = None, seed: int = 0) -> NoiseConfig:
    """Load a noise model; ``None`` loads the shipped default."""
    doc = _load_yaml(path, "noise_default.yaml")
    try:
        return NoiseConfig(bbox_jitter_px=float(doc.get("bbox_jitter_px", 0.0)),
                           miss_rate=float(doc.get("miss_rate", 0.0)),
                           confusion_rate=float(doc.get("confusion_rate", 0.0)),
                           seed=seed)
    except ValueError as exc:
        raise ConfigError(f"bad noise config: {exc}") from exc
