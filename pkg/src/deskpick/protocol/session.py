"""Session engine: one seeded trial world plus the message loop around it.

The engine is the single owner of all mutable session state. It consumes
operator messages (commands, marker moves), runs perception once at scene
setup, executes pick/place through the planner, advances a simulated clock
(command latencies plus trajectory time; never wall time), and emits the
outbound message stream. Every inbound line and outbound message lands in
the transcript, so identical command logs produce byte-identical
transcripts regardless of transport.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import intent
from ..arm import chain_from_config, fk
from ..config import (
    ArmConfig,
    CameraConfig,
    ExperimentConfig,
    load_arm_config,
    load_camera_config,
    load_experiment_config,
)
from ..errors import SimError
from ..geometry import estimate_fiducial_pose, marker_corners_table
from ..grasp import NoFeasibleGraspError, lift_to_pose, propose_grasps
from ..perception import ZERO_NOISE, Detection2D, NoiseConfig, detect, localize
from ..planner import (
    JogCommand,
    WorldState,
    execute_pick,
    execute_place,
    grasp_check,
    jog,
    segment_duration,
)
from ..scene import Scene, render, scene_to_doc, spawn_scene
from .messages import Message, ProtocolParseError, decode_line, encode_message

SEMIAUTO_COMMANDS = {c.value: c for c in intent.MenuCommand}
JOG_COMMANDS = {c.value: c for c in JogCommand}

MODES = ("semiauto", "cartesian")


@dataclass
class SessionConfig:
    mode: str = "semiauto"
    scene_seed: int = 7
    classes: tuple[str, ...] = ("ball",)
    scene: Scene | None = None
    noise: NoiseConfig = ZERO_NOISE
    target: tuple[float, float] | None = None
    camera: CameraConfig = field(default_factory=load_camera_config)
    arm: ArmConfig = field(default_factory=load_arm_config)
    experiment: ExperimentConfig = field(default_factory=load_experiment_config)
    calibrate_from_fiducial: bool = True

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


class SessionEngine:
    """Synchronous message-in, messages-out session core."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.camera = cfg.camera.camera
        true_pose = cfg.camera.pose()
        if cfg.calibrate_from_fiducial:
            corners = self.camera.project(
                true_pose.apply(marker_corners_table(cfg.camera.marker_side)))
            self.cam_pose = estimate_fiducial_pose(
                corners, cfg.camera.marker_side, self.camera)
        else:
            self.cam_pose = true_pose

        scene = cfg.scene if cfg.scene is not None else spawn_scene(
            cfg.scene_seed, list(cfg.classes), cfg.experiment.table_extent,
            cfg.experiment.reachable_region)
        chain = chain_from_config(cfg.arm)
        self.world = WorldState(scene, chain, cfg.arm.table_from_base(),
                                chain.home_q.copy(), cfg.experiment.planner)

        # One perception pass over the rendered sensor frame; the detector
        # consumes the (possibly noisy) oracle and localization runs per
        # detection using the calibrated camera pose.
        self.image = render(scene, true_pose, self.camera)
        self.detections: list[Detection2D] = []
        self.boxes = {}
        for det in detect(self.image, cfg.noise):
            try:
                box = localize(self.image, self.camera, self.cam_pose, det,
                               cfg.experiment.plane_tolerance,
                               cfg.experiment.cluster_radius)
            except SimError:
                continue  # undetectable blob: drop the affordance
            self.detections.append(det)
            self.boxes[det.object_id] = box

        view = intent.CameraView(self.camera, self.cam_pose)
        self.state = intent.ingest_detections(intent.SessionState(view),
                                              self.detections)

        self.clock = 0.0
        self.out_seq = 0
        self.last_in_seq = -1
        self.transcript: list[str] = []
        self._buffer: list[str] = []

        self.jog_count = 0
        self.picked = False
        self.pickup_time = 0.0
        self.placed = False
        self.place_time = 0.0
        self.final_center: np.ndarray | None = None
        self.trial_done = False
        self.failure_reason: str | None = None

    # -- transcript / emission -------------------------------------------

    def _send(self, kind: str, payload: dict) -> None:
        self.out_seq += 1
        line = encode_message(Message(self.out_seq, kind, payload))
        self.transcript.append("S " + line)
        self._buffer.append(line)

    def transcript_text(self) -> str:
        return "\n".join(self.transcript) + ("\n" if self.transcript else "")

    def reset_inbound_seq(self) -> None:
        """Per-connection inbound ordering restarts on reconnect."""
        self.last_in_seq = -1

    # -- public entry points ----------------------------------------------

    def handle_line(self, line: str) -> list[str]:
        """Process one raw inbound line; returns encoded outbound lines."""
        self.transcript.append("C " + line.strip())
        self._buffer = []
        try:
            msg = decode_line(line)
        except ProtocolParseError as exc:
            self._send("error", {"message": str(exc),
                                 "line": exc.line.strip()[:200]})
            return self._buffer
        self._dispatch(msg)
        return self._buffer

    def handle_message(self, msg: Message) -> list[str]:
        return self.handle_line(encode_message(msg))

    # -- dispatch -----------------------------------------------------------

    def _dispatch(self, msg: Message) -> None:
        if msg.seq <= self.last_in_seq:
            self._send("error", {"message": f"seq {msg.seq} not increasing",
                                 "ref_seq": msg.seq})
            return
        self.last_in_seq = msg.seq

        if msg.kind == "hello":
            self._send("hello", {"server": "deskpick", "version": 1,
                                 "mode": self.cfg.mode})
            self.send_snapshot()
            return
        if msg.kind == "command":
            if self.cfg.mode == "semiauto":
                self._semiauto_command(msg)
            else:
                self._cartesian_command(msg)
            return
        if msg.kind == "marker_move":
            self._marker_move(msg)
            return
        self._send("error", {"message": f"operator cannot send {msg.kind}",
                             "ref_seq": msg.seq})

    def send_snapshot(self) -> None:
        """Full state push: scene, menu, phase; used at hello and resume."""
        cam = self.camera
        self._send("scene_snapshot", {
            "clock": self.clock,
            "mode": self.cfg.mode,
            "scene": scene_to_doc(self.world.scene),
            "camera": {
                "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                "width": cam.width, "height": cam.height,
                "pose_quat_wxyz": [float(v) for v in self.cam_pose.rotation],
                "pose_translation": [float(v) for v in self.cam_pose.translation],
            },
            "target": list(self.cfg.target) if self.cfg.target else None,
            "gripper_table": self.gripper_table_position(),
            "gripper_opening": self.world.gripper_opening,
        })
        self._send_menu()
        self._send_phase()

    def _send_menu(self) -> None:
        menu = (self.state.action_menu
                if self.state.phase is intent.TaskPhase.ACTION_MENU
                else self.state.object_menu)
        self._send("menu_update", {
            "clock": self.clock,
            "items": [{"object_id": i.object_id, "label": i.class_label,
                       "actions": list(i.actions)} for i in menu.items],
            "highlighted": menu.highlighted,
        })

    def _send_phase(self) -> None:
        marker = None
        if self.state.marker is not None:
            marker = {"pixel": [float(v) for v in self.state.marker.pixel],
                      "table_point": [float(v) for v in
                                      self.state.marker.table_point]}
        phase = "cartesian" if self.cfg.mode == "cartesian" else \
            self.state.phase.value
        self._send("phase_update", {
            "clock": self.clock,
            "phase": phase,
            "warning": self.state.warning,
            "marker": marker,
            "held_object": self.held_object_id(),
            "counted_commands": self.counted_commands(),
        })

    def held_object_id(self) -> int | None:
        return self.world.held.object_id if self.world.held else None

    def counted_commands(self) -> int:
        if self.cfg.mode == "cartesian":
            return self.jog_count
        return self.state.counted_commands

    def gripper_table_position(self) -> list[float]:
        return [float(v) for v in self.world.gripper_pose_table().translation]

    # -- semiauto ---------------------------------------------------------

    def _semiauto_command(self, msg: Message) -> None:
        name = msg.payload["name"]
        cmd = SEMIAUTO_COMMANDS.get(name)
        if cmd is None:
            self._send("error", {"message": f"unknown command {name!r}",
                                 "ref_seq": msg.seq})
            return
        self.clock += self.cfg.experiment.command_latency
        menu_before = (self.state.object_menu, self.state.action_menu,
                       self.state.phase)
        self.state, action = intent.step(self.state, cmd)
        self._send("ack", {"ref_seq": msg.seq, "clock": self.clock,
                           "counted": self.counted_commands(),
                           "warning": self.state.warning})
        if (self.state.object_menu, self.state.action_menu,
                self.state.phase) != menu_before:
            self._send_menu()
        if isinstance(action, intent.PickAction):
            self._run_pick(action.object_id)
        elif isinstance(action, intent.PlaceAction):
            self._run_place(action.target)
        self._send_phase()

    def _marker_move(self, msg: Message) -> None:
        if self.cfg.mode != "semiauto":
            self._send("error", {"message": "marker_move needs semiauto mode",
                                 "ref_seq": msg.seq})
            return
        self.clock += self.cfg.experiment.marker_latency
        move = intent.MarkerMove(float(msg.payload["du"]),
                                 float(msg.payload["dv"]))
        self.state, _ = intent.step(self.state, move)
        marker = None
        if self.state.marker is not None:
            marker = {"pixel": [float(v) for v in self.state.marker.pixel],
                      "table_point": [float(v) for v in
                                      self.state.marker.table_point]}
        self._send("ack", {"ref_seq": msg.seq, "clock": self.clock,
                           "counted": self.counted_commands(),
                           "warning": self.state.warning, "marker": marker})

    def _stream_segments(self, executing: str, segments) -> None:
        chain = self.world.chain
        for si, seg in enumerate(segments):
            for wi, q in enumerate(seg.waypoints):
                if wi > 0:
                    self.clock += segment_duration(chain, seg.waypoints[wi - 1], q)
                base_pose = fk(chain, q)
                grip = self.world.table_from_base.apply(base_pose.translation)
                self._send("robot_status", {
                    "clock": self.clock, "executing": executing,
                    "segment": si, "waypoint": wi, "total": len(seg),
                    "gripper_table": [float(v) for v in grip],
                })

    def _run_pick(self, object_id: int) -> None:
        box = self.boxes.get(object_id)
        outcome = None
        if box is None:
            success, reason, segments = False, "object was never localized", ()
        else:
            gripper = self.world.chain.gripper
            try:
                cands = propose_grasps(box, gripper.max_opening, gripper,
                                       self.cfg.experiment.n_orientations)
                pose6 = lift_to_pose(cands[0], box,
                                     self.world.table_from_base.invert())
            except NoFeasibleGraspError as exc:
                success, reason, segments = False, str(exc), ()
            else:
                outcome = execute_pick(self.world, pose6, object_id)
                success, reason = outcome.success, outcome.reason
                segments = outcome.segments
        self._stream_segments("pick", segments)
        if outcome is not None:
            self.clock += self.world.chain.gripper.action_time
        self.picked = success
        self.pickup_time = self.clock
        if not success:
            self.failure_reason = reason
        self.state = intent.on_pick_result(self.state, success)
        if not success:
            self._send_menu()

    def _run_place(self, target: np.ndarray) -> None:
        held_id = self.held_object_id()
        outcome = execute_place(self.world, target[:2])
        self._stream_segments("place", outcome.segments)
        if outcome.success:
            self.clock += self.world.chain.gripper.action_time
        self.place_time = self.clock - self.pickup_time
        self.final_center = outcome.final_center
        judged = False
        if outcome.success and held_id is not None:
            judged = self._judge(held_id, outcome.final_center)
        self.placed = judged
        if not outcome.success:
            self.failure_reason = outcome.reason
        self.state = intent.on_place_result(self.state, outcome.success)
        self.trial_done = True
        self._send_trial_result(judged)

    def _judge(self, object_id: int, final_center: np.ndarray) -> bool:
        if self.cfg.target is None:
            return True  # free-form session: any completed place counts
        from ..harness import judge_place  # local import, avoids cycle
        obj = self.world.scene.object_by_id(object_id)
        footprint = obj.footprint() - obj.pose.translation[:2]
        return judge_place(final_center, np.asarray(self.cfg.target), footprint,
                           self.cfg.experiment.placement_expansion)

    def _send_trial_result(self, judged: bool) -> None:
        self._send("trial_result", {
            "clock": self.clock,
            "picked": self.picked,
            "pickup_time": self.pickup_time,
            "placed": self.placed,
            "place_time": self.place_time,
            "n_commands": self.counted_commands(),
            "final_center": None if self.final_center is None else
                [float(v) for v in self.final_center],
            "target": list(self.cfg.target) if self.cfg.target else None,
            "judge": judged,
            "reason": self.failure_reason,
        })

    # -- cartesian ---------------------------------------------------------

    def _cartesian_command(self, msg: Message) -> None:
        name = msg.payload["name"]
        cmd = JOG_COMMANDS.get(name)
        if cmd is None:
            self._send("error", {"message": f"unknown jog command {name!r}",
                                 "ref_seq": msg.seq})
            return
        self.jog_count += 1
        self.clock += self.cfg.experiment.command_latency
        exp = self.cfg.experiment
        held_id = self.held_object_id()
        result = jog(self.world.chain, self.world.q, cmd, exp.step_linear,
                     exp.step_angular, self.world.scene,
                     self.world.table_from_base, held_id)
        self.world.q = result.q
        self.clock += result.duration
        extra: dict = {}
        released = False
        if result.gripper_action == "close":
            extra["held"] = self._cartesian_close()
        elif result.gripper_action == "open":
            released = self._cartesian_open()
            extra["released"] = released
        self._send("ack", {"ref_seq": msg.seq, "clock": self.clock,
                           "counted": self.counted_commands(),
                           "rejected": result.rejected,
                           "gripper_table": self.gripper_table_position(),
                           **extra})
        if released:
            self._send_trial_result(self.placed)
        if result.gripper_action is None and not result.rejected:
            self._send("robot_status", {
                "clock": self.clock, "executing": "jog", "segment": 0,
                "waypoint": 1, "total": 2,
                "gripper_table": self.gripper_table_position()})

    def _cartesian_close(self) -> bool:
        if self.world.held is not None:
            return True
        for obj in self.world.scene.objects:
            if obj.id in self.world.scene.off_table:
                continue
            ok, _ = grasp_check(self.world, obj.id, self.world.gripper_opening)
            if ok:
                from ..planner import attach_object
                attach_object(self.world, obj.id)
                self.world.gripper_opening = obj.grasp_width
                self.picked = True
                self.pickup_time = self.clock
                return True
        self.world.gripper_opening = 0.0
        return False

    def _cartesian_open(self) -> bool:
        released = False
        if self.world.held is not None:
            held_id = self.world.held.object_id
            from ..planner import _settle_released_object
            self.final_center = _settle_released_object(self.world)
            self.place_time = self.clock - self.pickup_time
            self.placed = self._judge(held_id, self.final_center)
            self.trial_done = True
            released = True
        self.world.gripper_opening = self.world.chain.gripper.max_opening
        return released

    # -- introspection ------------------------------------------------------

    def state_doc(self) -> dict:
        menu = (self.state.action_menu
                if self.state.phase is intent.TaskPhase.ACTION_MENU
                else self.state.object_menu)
        return {
            "mode": self.cfg.mode,
            "clock": self.clock,
            "phase": ("cartesian" if self.cfg.mode == "cartesian"
                      else self.state.phase.value),
            "menu": [{"object_id": i.object_id, "label": i.class_label,
                      "actions": list(i.actions)} for i in menu.items],
            "highlighted": menu.highlighted,
            "held_object": self.held_object_id(),
            "counted_commands": self.counted_commands(),
            "picked": self.picked,
            "placed": self.placed,
            "trial_done": self.trial_done,
            "final_center": None if self.final_center is None else
                [float(v) for v in self.final_center],
        }


def replay_command_lines(cfg: SessionConfig, lines: list[str]) -> str:
    """Feed a recorded command log through a fresh engine; returns the full
    transcript text (the replay-equivalence fixture)."""
    engine = SessionEngine(cfg)
    for line in lines:
        engine.handle_line(line)
    return engine.transcript_text()
