"""Experiment harness: seeded single-object trials driven by scripted
operator policies, the placement judge, and Table-style metric reports.

Each trial spawns one object at a random reachable pose, sets a placement
target exactly 30 cm from the pickup location, and lets a policy steer a
session engine through its message interface (the same surface a human
operator uses). Records aggregate into per-class rows plus an average row,
rendered both machine-readable and as an aligned text table.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import footprints
from .config import ExperimentConfig, load_arm_config, load_camera_config, \
    load_experiment_config
from .errors import SimError
from .geometry import PinholeCamera, RigidTransform
from .perception import NoiseConfig, ZERO_NOISE
from .protocol.messages import Message, decode_line, encode_message
from .protocol.session import SessionConfig, SessionEngine
from .scene import OBJECT_CLASSES, Scene, scene_from_doc, spawn_scene


class EmptyReportError(SimError):
    """Report requested over zero records."""


# --------------------------------------------------------------------------
# placement judge
# --------------------------------------------------------------------------

def judge_place(final_center: np.ndarray, target: np.ndarray,
                footprint: np.ndarray, expansion: float = 0.01) -> bool:
    """Placement success per the 1 cm boundary rule.

    The target region is the object's own footprint (origin-centered
    polygon) centered on the target point and expanded by ``expansion`` on
    every side (Minkowski sum with a closed disk). Success iff the final
    object center lies inside; boundary contact counts as success.
    """
    final = np.asarray(final_center, dtype=float)[:2]
    tgt = np.asarray(target, dtype=float)[:2]
    poly = np.asarray(footprint, dtype=float) + tgt
    return footprints.polygon_contains_within(final, poly, expansion)


# --------------------------------------------------------------------------
# trial records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    object_class: str
    mode: str
    picked: bool
    pickup_time: float
    placed: bool
    place_time: float
    n_commands: int
    seed: int
    pickup_xy: tuple[float, float]
    target_xy: tuple[float, float]
    final_center: tuple[float, float] | None

    def __post_init__(self) -> None:
        if self.placed and not self.picked:
            raise ValueError("placed implies picked")
        if self.pickup_time < 0 or self.place_time < 0:
            raise ValueError("times must be non-negative")


def records_to_json(records: list[TrialRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=2) + "\n"


def records_from_json(text: str) -> list[TrialRecord]:
    out = []
    for doc in json.loads(text):
        doc["pickup_xy"] = tuple(doc["pickup_xy"])
        doc["target_xy"] = tuple(doc["target_xy"])
        if doc["final_center"] is not None:
            doc["final_center"] = tuple(doc["final_center"])
        out.append(TrialRecord(**doc))
    return out


# --------------------------------------------------------------------------
# scripted operator policies
# --------------------------------------------------------------------------

class PolicyView:
    """Client-side knowledge a policy accumulates from the message stream."""

    def __init__(self) -> None:
        self.phase: str | None = None
        self.menu: list[dict] = []
        self.highlighted = 0
        self.marker_pixel: tuple[float, float] | None = None
        self.scene: Scene | None = None
        self.camera: PinholeCamera | None = None
        self.cam_pose: RigidTransform | None = None
        self.target: np.ndarray | None = None
        self.gripper_table: np.ndarray | None = None
        self.last_rejected = False
        self.held = False
        self.trial_done = False

    def on_line(self, line: str) -> None:
        msg = decode_line(line)
        p = msg.payload
        if msg.kind == "scene_snapshot":
            self.scene = scene_from_doc(p["scene"])
            cam = p["camera"]
            self.camera = PinholeCamera(cam["fx"], cam["fy"], cam["cx"],
                                        cam["cy"], cam["width"], cam["height"])
            from .geometry import FrameId
            self.cam_pose = RigidTransform(
                np.array(cam["pose_quat_wxyz"]),
                np.array(cam["pose_translation"]),
                FrameId.CAMERA, FrameId.TABLE)
            self.target = None if p["target"] is None else np.array(p["target"])
            if p.get("gripper_table") is not None:
                self.gripper_table = np.array(p["gripper_table"])
        elif msg.kind == "menu_update":
            self.menu = p["items"]
            self.highlighted = p["highlighted"]
        elif msg.kind == "phase_update":
            self.phase = p["phase"]
            if p.get("marker"):
                self.marker_pixel = tuple(p["marker"]["pixel"])
        elif msg.kind == "ack":
            self.last_rejected = bool(p.get("rejected", False))
            if p.get("gripper_table") is not None:
                self.gripper_table = np.array(p["gripper_table"])
            if "held" in p:
                self.held = bool(p["held"])
            if p.get("marker"):
                self.marker_pixel = tuple(p["marker"]["pixel"])
        elif msg.kind == "trial_result":
            self.trial_done = True


class SemiAutoPolicy:
    """Menu-driven operator: navigate to the object, trigger the pick, point
    the marker at the target, trigger the place. Gives up after a failed
    pick (a deterministic retry would fail identically)."""

    def __init__(self, target_object_id: int | None = None):
        self.view = PolicyView()
        self.target_object_id = target_object_id
        self.pick_sent = False
        self.marker_done = False

    def on_line(self, line: str) -> None:
        self.view.on_line(line)

    def _target_index(self) -> int | None:
        if self.target_object_id is None:
            return 0 if self.view.menu else None
        for i, item in enumerate(self.view.menu):
            if item["object_id"] == self.target_object_id:
                return i
        return None

    def next_message(self) -> tuple[str, dict] | None:
        v = self.view
        if v.trial_done or v.phase in ("done", "failed"):
            return None
        if v.phase == "object_menu":
            if self.pick_sent:
                return None  # pick already failed once; stop the trial
            idx = self._target_index()
            if idx is None:
                return None  # object never made it onto the menu
            if v.highlighted != idx:
                return ("command", {"name": "right"})
            return ("command", {"name": "select"})
        if v.phase == "action_menu":
            self.pick_sent = True
            return ("command", {"name": "select"})
        if v.phase == "place_pointing":
            if v.target is None or v.camera is None:
                return ("command", {"name": "select"})
            if not self.marker_done:
                tgt_px = v.camera.project(
                    v.cam_pose.apply(np.array([v.target[0], v.target[1], 0.0])))
                du = float(tgt_px[0] - v.marker_pixel[0])
                dv = float(tgt_px[1] - v.marker_pixel[1])
                self.marker_done = True
                return ("marker_move", {"du": du, "dv": dv})
            return ("command", {"name": "select"})
        return None


class CartesianPolicy:
    """Greedy jog operator using ground-truth object pose: rotate the wrist
    to the object's narrow axis, hover, descend, close, lift, carry to the
    target, descend, open. An idealized skilled user."""

    HOVER = 0.16

    def __init__(self, step_linear: float = 0.02, step_angular: float = 0.15):
        self.view = PolicyView()
        self.step = step_linear
        self.step_ang = step_angular
        self.stage = "rotate"
        self.rot_remaining: int | None = None
        self.grasp_z: float | None = None

    def on_line(self, line: str) -> None:
        self.view.on_line(line)

    def _plan_rotation(self) -> int:
        obj = self.view.scene.objects[0]
        poly = obj.footprint()
        best_theta, best_w = 0.0, math.inf
        for k in range(64):
            theta = -math.pi / 2 + (k + 1) * math.pi / 64
            u = np.array([math.cos(theta), math.sin(theta)])
            lo, hi = footprints.project_onto_axis(poly, u)
            if hi - lo < best_w:
                best_w, best_theta = hi - lo, theta
        # Home closing axis lies along the table x axis (theta 0). The
        # wrist spins about the downward tool axis, so each positive ROT
        # step decreases the closing-axis yaw in table coordinates; wrap
        # the required (negated) turn into [0, pi).
        turn = (-best_theta) % math.pi
        self.grasp_z = max(obj.height - 0.01, 0.012)
        return int(round(turn / self.step_ang))

    def _axis_step(self, delta: float, pos_cmd: str, neg_cmd: str):
        if abs(delta) <= self.step / 2:
            return None
        return (pos_cmd if delta > 0 else neg_cmd)

    def next_message(self) -> tuple[str, dict] | None:
        v = self.view
        if v.trial_done or v.scene is None:
            return None
        obj = v.scene.objects[0]
        goal_xy = obj.pose.translation[:2] if not v.held else v.target
        grip = v.gripper_table

        if self.stage == "rotate":
            if self.rot_remaining is None:
                self.rot_remaining = self._plan_rotation()
            if self.rot_remaining > 0:
                self.rot_remaining -= 1
                return ("command", {"name": "rot"})
            self.stage = "approach"
        if self.stage == "approach":
            cmd = self._axis_step(goal_xy[0] - grip[0], "tx+", "tx-") or \
                self._axis_step(goal_xy[1] - grip[1], "ty+", "ty-")
            if cmd:
                return ("command", {"name": cmd})
            self.stage = "descend"
        if self.stage == "descend":
            if v.last_rejected:
                self.stage = "close"  # table stopped us; close here
            else:
                if grip[2] - self.grasp_z > self.step / 2:
                    return ("command", {"name": "tz-"})
                self.stage = "close"
        if self.stage == "close":
            self.stage = "verify"
            return ("command", {"name": "close"})
        if self.stage == "verify":
            if not v.held:
                return None  # grasp missed; the idealized user gives up
            self.stage = "lift"
        if self.stage == "lift":
            if grip[2] < self.HOVER:
                return ("command", {"name": "tz+"})
            self.stage = "carry"
        if self.stage == "carry":
            cmd = self._axis_step(v.target[0] - grip[0], "tx+", "tx-") or \
                self._axis_step(v.target[1] - grip[1], "ty+", "ty-")
            if cmd:
                return ("command", {"name": cmd})
            self.stage = "lower"
        if self.stage == "lower":
            if not v.last_rejected and grip[2] - (self.grasp_z + 0.02) > self.step / 2:
                return ("command", {"name": "tz-"})
            self.stage = "open"
        if self.stage == "open":
            self.stage = "finish"
            return ("command", {"name": "open"})
        return None


def drive_session(engine: SessionEngine, policy, max_steps: int = 400) -> list[str]:
    """Run a policy against an engine over the message interface; returns
    the inbound command log (encoded lines) for replay fixtures."""
    seq = 0
    log: list[str] = []

    def send(kind: str, payload: dict) -> None:
        nonlocal seq
        seq += 1
        line = encode_message(Message(seq, kind, payload))
        log.append(line)
        for out in engine.handle_line(line):
            policy.on_line(out)

    send("hello", {"role": "operator"})
    for _ in range(max_steps):
        nxt = policy.next_message()
        if nxt is None:
            break
        send(*nxt)
    return log


# --------------------------------------------------------------------------
# trials
# --------------------------------------------------------------------------

def _trial_target(rng: np.random.Generator, pickup: np.ndarray,
                  region, distance: float) -> np.ndarray:
    for _ in range(500):
        ang = rng.uniform(-math.pi, math.pi)
        cand = pickup + distance * np.array([math.cos(ang), math.sin(ang)])
        if region.contains_point(float(cand[0]), float(cand[1])):
            return cand
    raise SimError("no placement target at the required distance fits the region")


def run_trial(object_class: str, mode: str, trial_seed: int,
              noise: NoiseConfig = ZERO_NOISE,
              experiment: ExperimentConfig | None = None,
              camera=None, arm=None) -> tuple[TrialRecord, SessionEngine, list[str]]:
    """One seeded single-object trial; returns the record, the finished
    engine, and the inbound command log."""
    experiment = experiment or load_experiment_config()
    camera = camera or load_camera_config()
    arm = arm or load_arm_config()
    ss = np.random.SeedSequence(trial_seed)
    scene_seed, noise_seed, aux_seed = (int(s) for s in ss.generate_state(3))

    scene = spawn_scene(scene_seed, [object_class], experiment.table_extent,
                        experiment.reachable_region)
    pickup = scene.objects[0].pose.translation[:2].copy()
    rng = np.random.default_rng(aux_seed)
    target = _trial_target(rng, pickup, experiment.reachable_region,
                           experiment.target_distance)

    cfg = SessionConfig(
        mode=mode, scene=scene,
        noise=NoiseConfig(noise.bbox_jitter_px, noise.miss_rate,
                          noise.confusion_rate, seed=noise_seed),
        target=(float(target[0]), float(target[1])),
        camera=camera, arm=arm, experiment=experiment)
    engine = SessionEngine(cfg)
    policy = SemiAutoPolicy() if mode == "semiauto" else \
        CartesianPolicy(experiment.step_linear, experiment.step_angular)
    log = drive_session(engine, policy)

    record = TrialRecord(
        object_class=object_class, mode=mode,
        picked=engine.picked, pickup_time=engine.pickup_time,
        placed=engine.placed, place_time=engine.place_time,
        n_commands=engine.counted_commands(), seed=trial_seed,
        pickup_xy=(float(pickup[0]), float(pickup[1])),
        target_xy=(float(target[0]), float(target[1])),
        final_center=None if engine.final_center is None else
            (float(engine.final_center[0]), float(engine.final_center[1])))
    return record, engine, log


def run_trials(classes: list[str], trials_per_class: int, mode: str,
               noise: NoiseConfig = ZERO_NOISE, seed: int = 0,
               experiment: ExperimentConfig | None = None) -> list[TrialRecord]:
    """The full protocol: ``trials_per_class`` seeded trials per class,
    target placement at the configured distance, deterministic end to end."""
    for c in classes:
        if c not in OBJECT_CLASSES:
            raise ValueError(f"unknown class {c!r}")
    if mode not in ("semiauto", "cartesian"):
        raise ValueError("mode must be semiauto or cartesian")
    experiment = experiment or load_experiment_config()
    camera = load_camera_config()
    arm = load_arm_config()
    records = []
    for ci, object_class in enumerate(classes):
        for t in range(trials_per_class):
            trial_seed = int(np.random.SeedSequence(
                entropy=(seed, ci, t)).generate_state(1)[0])
            record, _, _ = run_trial(object_class, mode, trial_seed, noise,
                                     experiment, camera, arm)
            records.append(record)
    return records


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    object_class: str
    trials: int
    picked: int
    pickup_mean: float
    pickup_std: float
    placed: int
    place_mean: float
    place_std: float
    commands_mean: float


@dataclass(frozen=True)
class Report:
    mode: str
    rows: tuple[ReportRow, ...]
    average: ReportRow

    def to_doc(self) -> dict:
        return {"mode": self.mode, "rows": [asdict(r) for r in self.rows],
                "average": asdict(self.average)}

    def to_text(self) -> str:
        header = (f"{'object':<14} | {'picked up':>9} | {'pickup time (s)':>17} |"
                  f" {'place':>9} | {'place time (s)':>16} | {'# commands':>10}")
        lines = [f"mode: {self.mode}", header, "-" * len(header)]
        for r in list(self.rows) + [self.average]:
            lines.append(
                f"{r.object_class:<14} | {r.picked:>4}/{r.trials:<4} |"
                f" {r.pickup_mean:>8.1f} ± {r.pickup_std:<6.1f} |"
                f" {r.placed:>4}/{r.trials:<4} |"
                f" {r.place_mean:>7.1f} ± {r.place_std:<6.1f} |"
                f" {r.commands_mean:>10.1f}")
        return "\n".join(lines) + "\n"


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    std = 0.0 if len(arr) < 2 else float(arr.std(ddof=1))
    return mean, std


def report(records: list[TrialRecord]) -> Report:
    """Per-class rows (success counts, mean ± sample-stddev times, mean
    command counts) plus an average row equal to the arithmetic mean of the
    class rows. Times average over all trials of the class."""
    if not records:
        raise EmptyReportError("no trial records to report")
    classes = []
    for r in records:
        if r.object_class not in classes:
            classes.append(r.object_class)
    rows = []
    for c in classes:
        rs = [r for r in records if r.object_class == c]
        pickup_mean, pickup_std = _mean_std([r.pickup_time for r in rs])
        place_mean, place_std = _mean_std([r.place_time for r in rs])
        rows.append(ReportRow(
            object_class=c, trials=len(rs),
            picked=sum(r.picked for r in rs),
            pickup_mean=pickup_mean, pickup_std=pickup_std,
            placed=sum(r.placed for r in rs),
            place_mean=place_mean, place_std=place_std,
            commands_mean=float(np.mean([r.n_commands for r in rs]))))
    n = len(rows)
    average = ReportRow(
        object_class="average", trials=round(sum(r.trials for r in rows) / n),
        picked=sum(r.picked for r in rows) / n,
        pickup_mean=float(np.mean([r.pickup_mean for r in rows])),
        pickup_std=float(np.mean([r.pickup_std for r in rows])),
        placed=sum(r.placed for r in rows) / n,
        place_mean=float(np.mean([r.place_mean for r in rows])),
        place_std=float(np.mean([r.place_std for r in rows])),
        commands_mean=float(np.mean([r.commands_mean for r in rows])))
    mode = records[0].mode
    return Report(mode, tuple(rows), average)
