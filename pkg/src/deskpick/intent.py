"""Menu-driven intent state machine.

Detections become a left-to-right object menu; four discrete commands
(LEFT, RIGHT, SELECT, BACK) plus marker nudges steer the machine through
object choice, action choice, pick execution, placement pointing, and
placement. A SELECT that dispatches a robot action (in the action menu or
while pointing) is a *counted* command; menu navigation and marker motion
are not, mirroring the two-command operation of the semi-autonomous mode.

Phase-transition table (commands; action results in brackets):

    Idle           -> ObjectMenu      menu built from non-empty detections
    ObjectMenu     LEFT/RIGHT: move highlight (wraps)
                   SELECT: -> ActionMenu      (not counted)
                   BACK:   -> Idle
    ActionMenu     LEFT/RIGHT: move highlight (wraps)
                   SELECT on Pick: emit PickAction -> Picking   (counted)
                   BACK:   -> ObjectMenu
    Picking        [pick ok]   -> PlacePointing, marker at image center
                   [pick fail] -> ObjectMenu (attempt recorded by session)
    PlacePointing  MarkerMove(du, dv): move + re-project marker
                   SELECT: emit PlaceAction -> Placing          (counted)
    Placing        [place ok]   -> Done
                   [place fail] -> Failed
    Done / Failed  terminal

Illegal commands in any phase are flagged no-ops.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SimError
from .geometry import ParallelRayError, PinholeCamera, RigidTransform, intersect_ray_table
from .perception import Detection2D


class MenuCommand(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    SELECT = "select"
    BACK = "back"


@dataclass(frozen=True)
class MarkerMove:
    du: float
    dv: float


UserCommand = "MenuCommand | MarkerMove"


class TaskPhase(enum.Enum):
    IDLE = "idle"
    OBJECT_MENU = "object_menu"
    ACTION_MENU = "action_menu"
    PICKING = "picking"
    PLACE_POINTING = "place_pointing"
    PLACING = "placing"
    DONE = "done"
    FAILED = "failed"


# Phases where SELECT dispatches a robot action and therefore counts.
DECISION_PHASES = frozenset({TaskPhase.ACTION_MENU, TaskPhase.PLACE_POINTING})

PICK_AFFORDANCE = "pick"


@dataclass(frozen=True)
class MenuItem:
    object_id: int
    class_label: str
    actions: tuple[str, ...]


@dataclass(frozen=True)
class MenuState:
    items: tuple[MenuItem, ...]
    highlighted: int = 0

    def __post_init__(self) -> None:
        if self.items and not 0 <= self.highlighted < len(self.items):
            raise ValueError("highlight outside menu")

    def moved(self, step: int) -> "MenuState":
        if not self.items:
            return self
        return replace(self, highlighted=(self.highlighted + step) % len(self.items))


@dataclass(frozen=True)
class Marker:
    pixel: tuple[float, float]
    table_point: np.ndarray


@dataclass(frozen=True)
class CameraView:
    cam: PinholeCamera
    cam_pose: RigidTransform  # Camera <- Table


@dataclass(frozen=True)
class PickAction:
    object_id: int


@dataclass(frozen=True)
class PlaceAction:
    target: np.ndarray  # table-frame point


RobotAction = "PickAction | PlaceAction"


@dataclass(frozen=True)
class SessionState:
    view: CameraView
    phase: TaskPhase = TaskPhase.IDLE
    object_menu: MenuState = MenuState(())
    action_menu: MenuState = MenuState(())
    selected_object: int | None = None
    marker: Marker | None = None
    held_object: int | None = None
    counted_commands: int = 0
    warning: str | None = None


def build_menu(detections: list[Detection2D]) -> MenuState:
    """One item per detection, ordered left to right by bbox u_min, each
    carrying the pick affordance."""
    ordered = sorted(detections, key=lambda d: (d.bbox[0], d.object_id))
    items = tuple(MenuItem(d.object_id, d.class_label, (PICK_AFFORDANCE,))
                  for d in ordered)
    return MenuState(items)


def project_marker(pixel: tuple[float, float], cam: PinholeCamera,
                   cam_pose: RigidTransform) -> np.ndarray:
    """Table point under a pixel; raises ParallelRayError when the ray
    cannot hit the plane in front of the camera."""
    return intersect_ray_table(pixel, cam, cam_pose)


def _center_marker(view: CameraView) -> Marker:
    pixel = (view.cam.width / 2.0, view.cam.height / 2.0)
    return Marker(pixel, project_marker(pixel, view.cam, view.cam_pose))


def ingest_detections(state: SessionState,
                      detections: list[Detection2D]) -> SessionState:
    """Build the object menu from fresh detections; an empty detection list
    keeps the machine idle."""
    menu = build_menu(detections)
    if not menu.items:
        return replace(state, object_menu=menu, phase=TaskPhase.IDLE)
    if state.phase is TaskPhase.IDLE:
        return replace(state, object_menu=menu, phase=TaskPhase.OBJECT_MENU,
                       warning=None)
    return replace(state, object_menu=menu)


def _illegal(state: SessionState, cmd) -> tuple[SessionState, None]:
    name = cmd.value if isinstance(cmd, MenuCommand) else "marker_move"
    return replace(state, warning=f"{name} ignored in phase {state.phase.value}"), None


def step(state: SessionState, cmd) -> tuple[SessionState, "PickAction | PlaceAction | None"]:
    """Advance the machine by one user command.

    Returns the new state and, when a SELECT dispatches work, the robot
    action to execute. Illegal commands return the state unchanged except
    for a warning flag.
    """
    if isinstance(cmd, MarkerMove):
        if state.phase is not TaskPhase.PLACE_POINTING or state.marker is None:
            return _illegal(state, cmd)
        u = min(max(state.marker.pixel[0] + cmd.du, 0.0), state.view.cam.width - 1.0)
        v = min(max(state.marker.pixel[1] + cmd.dv, 0.0), state.view.cam.height - 1.0)
        try:
            point = project_marker((u, v), state.view.cam, state.view.cam_pose)
        except ParallelRayError:
            return replace(state, warning="marker ray misses the table"), None
        return replace(state, marker=Marker((u, v), point), warning=None), None

    if not isinstance(cmd, MenuCommand):
        raise TypeError(f"unknown command {cmd!r}")

    phase = state.phase
    if phase is TaskPhase.OBJECT_MENU:
        if cmd is MenuCommand.LEFT:
            return replace(state, object_menu=state.object_menu.moved(-1),
                           warning=None), None
        if cmd is MenuCommand.RIGHT:
            return replace(state, object_menu=state.object_menu.moved(1),
                           warning=None), None
        if cmd is MenuCommand.SELECT:
            if not state.object_menu.items:
                return _illegal(state, cmd)
            item = state.object_menu.items[state.object_menu.highlighted]
            action_menu = MenuState(
                (MenuItem(item.object_id, item.class_label, item.actions),))
            return replace(state, phase=TaskPhase.ACTION_MENU,
                           action_menu=action_menu,
                           selected_object=item.object_id, warning=None), None
        if cmd is MenuCommand.BACK:
            return replace(state, phase=TaskPhase.IDLE, warning=None), None

    elif phase is TaskPhase.ACTION_MENU:
        if cmd is MenuCommand.LEFT:
            return replace(state, action_menu=state.action_menu.moved(-1),
                           warning=None), None
        if cmd is MenuCommand.RIGHT:
            return replace(state, action_menu=state.action_menu.moved(1),
                           warning=None), None
        if cmd is MenuCommand.SELECT:
            item = state.action_menu.items[state.action_menu.highlighted]
            new = replace(state, phase=TaskPhase.PICKING,
                          counted_commands=state.counted_commands + 1,
                          warning=None)
            return new, PickAction(item.object_id)
        if cmd is MenuCommand.BACK:
            return replace(state, phase=TaskPhase.OBJECT_MENU,
                           selected_object=None, warning=None), None

    elif phase is TaskPhase.PLACE_POINTING:
        if cmd is MenuCommand.SELECT:
            assert state.marker is not None
            new = replace(state, phase=TaskPhase.PLACING,
                          counted_commands=state.counted_commands + 1,
                          warning=None)
            return new, PlaceAction(state.marker.table_point.copy())
        # BACK cannot un-pick a held object; LEFT/RIGHT have no menu here.
        return _illegal(state, cmd)

    return _illegal(state, cmd)


def on_pick_result(state: SessionState, success: bool) -> SessionState:
    """Deliver a pick outcome to the machine (session-loop event)."""
    if state.phase is not TaskPhase.PICKING:
        raise SimError(f"pick result delivered in phase {state.phase.value}")
    if success:
        return replace(state, phase=TaskPhase.PLACE_POINTING,
                       held_object=state.selected_object,
                       marker=_center_marker(state.view))
    return replace(state, phase=TaskPhase.OBJECT_MENU, selected_object=None)


def on_place_result(state: SessionState, success: bool) -> SessionState:
    """Deliver a place outcome to the machine (session-loop event)."""
    if state.phase is not TaskPhase.PLACING:
        raise SimError(f"place result delivered in phase {state.phase.value}")
    if success:
        return replace(state, phase=TaskPhase.DONE, held_object=None,
                       marker=None)
    return replace(state, phase=TaskPhase.FAILED)
