"""Motion planning with mixed configurations: joint-space starts, pose-space
goals, no closed-form inverse kinematics.

Goal configurations are sampled by damped-least-squares descent from random
seed configurations toward the target pose; a joint-space RRT (with a
straight-line fast path) connects the start to any sampled goal. The module
also provides the 9-command Cartesian jog baseline and the pick/place
execution skeletons that drive the simulated world.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import footprints
from .arm import KinematicChain, collision_free, fk, fk_rp, jacobian
from .config import PlannerParams
from .errors import SimError
from .geometry import (
    FrameId,
    RigidTransform,
    quat_conj,
    quat_mul,
    quat_to_rotvec,
    rotvec_from_matrix,
    wrap_orientation,
)
from .grasp import GraspPose6D
from .scene import Scene, apply_motion, upright_pose


class UnreachableGoalError(SimError):
    """Target lies beyond the arm's reach bound or outside the workspace."""


class PlanTimeoutError(SimError):
    """Search budget exhausted without connecting to a goal configuration."""


class StartInCollisionError(SimError):
    """Planning requested from a colliding or out-of-limit start."""


class InvalidStateError(SimError):
    """Pick/place called in a world state that does not admit it."""


class NoHeldObjectError(SimError):
    """Place requested with an empty gripper."""


@dataclass(frozen=True)
class PoseGoal:
    target: RigidTransform  # RobotBase <- Gripper
    pos_tol: float = 0.005
    ori_tol: float = math.radians(2.0)

    def __post_init__(self) -> None:
        if self.pos_tol <= 0 or self.ori_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[np.ndarray, ...]
    duration: float  # seconds, constant-speed per-joint timing

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]


class JogCommand(enum.Enum):
    TX_POS = "tx+"
    TX_NEG = "tx-"
    TY_POS = "ty+"
    TY_NEG = "ty-"
    TZ_POS = "tz+"
    TZ_NEG = "tz-"
    ROT = "rot"
    OPEN = "open"
    CLOSE = "close"


JOG_AXES = {
    JogCommand.TX_POS: np.array([1.0, 0, 0]),
    JogCommand.TX_NEG: np.array([-1.0, 0, 0]),
    JogCommand.TY_POS: np.array([0, 1.0, 0]),
    JogCommand.TY_NEG: np.array([0, -1.0, 0]),
    JogCommand.TZ_POS: np.array([0, 0, 1.0]),
    JogCommand.TZ_NEG: np.array([0, 0, -1.0]),
}


def pose_error(pose: RigidTransform, target: RigidTransform) -> tuple[float, float]:
    """(position error m, orientation error rad) between two poses."""
    dp = float(np.linalg.norm(pose.translation - target.translation))
    rel = quat_mul(target.rotation, quat_conj(pose.rotation))
    da = float(np.linalg.norm(quat_to_rotvec(rel)))
    return dp, da


def segment_duration(chain: KinematicChain, a: np.ndarray, b: np.ndarray) -> float:
    """Constant-speed timing: the slowest joint dictates the segment time."""
    return float(np.max(np.abs(b - a) / chain.speeds()))


def make_trajectory(chain: KinematicChain, waypoints: list[np.ndarray]) -> Trajectory:
    dur = sum(segment_duration(chain, a, b)
              for a, b in zip(waypoints, waypoints[1:]))
    return Trajectory(tuple(np.asarray(w, dtype=float) for w in waypoints), dur)


def _pose_error_rp(r: np.ndarray, p: np.ndarray,
                   target_r: np.ndarray, target_p: np.ndarray) -> np.ndarray:
    """6-vector twist error [dp; rotvec] between matrix-form poses."""
    return np.concatenate([target_p - p, rotvec_from_matrix(target_r @ r.T)])


def _dls_step(chain: KinematicChain, q: np.ndarray, target_r: np.ndarray,
              target_p: np.ndarray, damping: float = 0.05) -> np.ndarray:
    r, p = fk_rp(chain, q)
    err = _pose_error_rp(r, p, target_r, target_p)
    jac = jacobian(chain, q)
    # Locked joints (lo == hi) contribute nothing; mask their columns.
    locked = chain.limits_lo() == chain.limits_hi()
    jac[:, locked] = 0.0
    dq = jac.T @ np.linalg.solve(jac @ jac.T + damping ** 2 * np.eye(6), err)
    step = np.max(np.abs(dq))
    if step > 0.5:
        dq *= 0.5 / step
    return chain.clamp(q + dq)


def solve_pose_ik(chain: KinematicChain, q_seed: np.ndarray, goal: PoseGoal,
                  max_iters: int = 120) -> np.ndarray | None:
    """Damped-least-squares descent toward the pose; None when it stalls
    outside tolerance. Margin keeps converged solutions strictly inside."""
    q = np.asarray(q_seed, dtype=float).copy()
    target_r = goal.target.rotation_matrix
    target_p = goal.target.translation
    for _ in range(max_iters):
        r, p = fk_rp(chain, q)
        err = _pose_error_rp(r, p, target_r, target_p)
        if np.linalg.norm(err[:3]) < goal.pos_tol * 0.5 and \
                np.linalg.norm(err[3:]) < goal.ori_tol * 0.5:
            return q
        q = _dls_step(chain, q, target_r, target_p)
    return None


def _densify(a: np.ndarray, b: np.ndarray, step: float) -> list[np.ndarray]:
    """Waypoints from a (exclusive) to b (inclusive), inf-norm step bound."""
    gap = float(np.max(np.abs(b - a)))
    n = max(1, int(math.ceil(gap / step)))
    return [a + (b - a) * (k / n) for k in range(1, n + 1)]


def _segment_clear(chain: KinematicChain, a: np.ndarray, b: np.ndarray,
                   scene: Scene, table_from_base: RigidTransform,
                   held: int | None, step: float) -> list[np.ndarray] | None:
    pts = _densify(a, b, step)
    for q in pts:
        if not chain.within_limits(q):
            return None
        if not collision_free(chain, q, scene, table_from_base, held):
            return None
    return pts


def verify_trajectory(chain: KinematicChain, traj: Trajectory, scene: Scene,
                      table_from_base: RigidTransform, held: int | None,
                      step: float) -> bool:
    """Independent post-check: limits, collision, and step bound for every
    waypoint. Run by the planner before returning and reusable by tests."""
    for q in traj.waypoints:
        if not chain.within_limits(q):
            return False
        if not collision_free(chain, q, scene, table_from_base, held):
            return False
    for a, b in zip(traj.waypoints, traj.waypoints[1:]):
        if float(np.max(np.abs(b - a))) > step + 1e-9:
            return False
    return True


def plan_to_pose(chain: KinematicChain, q_start: np.ndarray, goal: PoseGoal,
                 scene: Scene, table_from_base: RigidTransform,
                 params: PlannerParams = PlannerParams(), seed: int = 0,
                 held: int | None = None) -> Trajectory:
    """Plan from a joint-space start to a pose goal.

    Raises UnreachableGoalError (before any search) when the target lies
    beyond the reach bound, StartInCollisionError for bad starts, and
    PlanTimeoutError when the sampling budget runs out. Deterministic for a
    fixed seed.
    """
    q_start = np.asarray(q_start, dtype=float)
    if not chain.within_limits(q_start):
        raise StartInCollisionError("start configuration violates joint limits")
    if not collision_free(chain, q_start, scene, table_from_base, held):
        raise StartInCollisionError("start configuration in collision")
    if np.linalg.norm(goal.target.translation) > chain.reach:
        raise UnreachableGoalError(
            f"target {np.linalg.norm(goal.target.translation):.3f} m from base "
            f"exceeds reach {chain.reach:.3f} m")

    dp, da = pose_error(fk(chain, q_start), goal.target)
    if dp <= goal.pos_tol and da <= goal.ori_tol:
        return Trajectory((q_start.copy(),), 0.0)

    rng = np.random.default_rng(seed)
    lo, hi = chain.limits_lo(), chain.limits_hi()

    # Goal-configuration sampling: DLS descent from the start first, then
    # from random seeds; keep collision-free converged configurations. Each
    # goal immediately tries the straight-line fast path before more
    # sampling effort is spent.
    goals: list[np.ndarray] = []
    for attempt in range(params.ik_attempts):
        q_seed = q_start if attempt == 0 else rng.uniform(lo, hi)
        q_goal = solve_pose_ik(chain, q_seed, goal)
        if q_goal is None:
            continue
        if not collision_free(chain, q_goal, scene, table_from_base, held):
            continue
        goals.append(q_goal)
        pts = _segment_clear(chain, q_start, q_goal, scene, table_from_base,
                             held, params.extension_step)
        if pts is not None:
            traj = make_trajectory(chain, [q_start] + pts)
            if verify_trajectory(chain, traj, scene, table_from_base, held,
                                 params.extension_step):
                return traj
        if len(goals) >= 3:
            break
    if not goals:
        raise PlanTimeoutError("no reachable collision-free goal configuration")
    goals.sort(key=lambda g: float(np.max(np.abs(g - q_start))))

    # Joint-space RRT with goal bias.
    nodes = [q_start.copy()]
    parents = [-1]
    arr = np.empty((params.max_iterations + 1, chain.n_joints))
    arr[0] = q_start
    n = 1
    for it in range(params.max_iterations):
        if it % 10 == 9:
            sample = goals[int(rng.integers(len(goals)))]
        else:
            sample = rng.uniform(lo, hi)
        dists = np.max(np.abs(arr[:n] - sample), axis=1)
        nearest = int(np.argmin(dists))
        gap = float(dists[nearest])
        if gap < 1e-12:
            continue
        direction = (sample - arr[nearest]) / gap
        q_new = chain.clamp(arr[nearest] + direction * min(params.extension_step, gap))
        if not collision_free(chain, q_new, scene, table_from_base, held):
            continue
        arr[n] = q_new
        nodes.append(q_new)
        parents.append(nearest)
        n += 1
        # Try to finish: connect the new node to the nearest goal config.
        for q_goal in goals:
            if float(np.max(np.abs(q_new - q_goal))) > 4 * params.extension_step:
                continue
            pts = _segment_clear(chain, q_new, q_goal, scene, table_from_base,
                                 held, params.extension_step)
            if pts is None:
                continue
            path = [q_goal]
            idx = n - 1
            path_back = []
            while idx >= 0:
                path_back.append(nodes[idx])
                idx = parents[idx]
            waypoints = list(reversed(path_back)) + pts
            traj = make_trajectory(chain, waypoints)
            if verify_trajectory(chain, traj, scene, table_from_base, held,
                                 params.extension_step):
                return traj
    raise PlanTimeoutError(f"no path after {params.max_iterations} iterations")


# --------------------------------------------------------------------------
# Cartesian jog
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class JogResult:
    q: np.ndarray
    rejected: bool
    gripper_action: str | None  # 'open' | 'close' | None
    duration: float  # motion time, seconds


def jog(chain: KinematicChain, q: np.ndarray, cmd: JogCommand, step_lin: float,
        step_ang: float, scene: Scene, table_from_base: RigidTransform,
        held: int | None = None) -> JogResult:
    """One discrete end-effector jog. Translations run a few damped
    least-squares steps holding orientation; rejected motions leave the
    configuration unchanged and set the flag."""
    q = np.asarray(q, dtype=float)
    if cmd is JogCommand.OPEN or cmd is JogCommand.CLOSE:
        return JogResult(q.copy(), False, cmd.value, chain.gripper.action_time)

    if cmd is JogCommand.ROT:
        q_new = q.copy()
        q_new[6] += step_ang
        if not chain.within_limits(q_new) or \
                not collision_free(chain, q_new, scene, table_from_base, held):
            return JogResult(q.copy(), True, None, 0.0)
        return JogResult(q_new, False, None, segment_duration(chain, q, q_new))

    start_r, start_p = fk_rp(chain, q)
    target_p = start_p + step_lin * JOG_AXES[cmd]
    q_new = q.copy()
    for _ in range(3):
        q_new = _dls_step(chain, q_new, start_r, target_p, damping=0.02)
    residual = float(np.linalg.norm(fk_rp(chain, q_new)[1] - target_p))
    if residual > 0.1 * step_lin or not chain.within_limits(q_new) or \
            not collision_free(chain, q_new, scene, table_from_base, held):
        return JogResult(q.copy(), True, None, 0.0)
    return JogResult(q_new, False, None, segment_duration(chain, q, q_new))


# --------------------------------------------------------------------------
# pick / place execution
# --------------------------------------------------------------------------

@dataclass
class HeldObject:
    object_id: int
    rel_pose: RigidTransform  # Gripper <- Object at grab time
    tcp_height_above_bottom: float


@dataclass
class WorldState:
    """Mutable simulation world owned by one session."""

    scene: Scene
    chain: KinematicChain
    table_from_base: RigidTransform
    q: np.ndarray
    params: PlannerParams = field(default_factory=PlannerParams)
    gripper_opening: float = 0.0
    held: HeldObject | None = None
    plan_seed: int = 0

    def __post_init__(self) -> None:
        if self.gripper_opening == 0.0:
            self.gripper_opening = self.chain.gripper.max_opening

    def gripper_pose_table(self) -> RigidTransform:
        return self.table_from_base.compose(fk(self.chain, self.q))

    def next_seed(self) -> int:
        self.plan_seed += 1
        return self.plan_seed


@dataclass(frozen=True)
class PickOutcome:
    success: bool
    reason: str | None
    segments: tuple[Trajectory, ...]
    duration: float  # motion + gripper action time


@dataclass(frozen=True)
class PlaceOutcome:
    success: bool
    reason: str | None
    final_center: np.ndarray | None
    segments: tuple[Trajectory, ...]
    duration: float


def grasp_check(world: WorldState, object_id: int,
                opening: float) -> tuple[bool, str | None]:
    """Geometric grasp success test at close time.

    ``opening`` is the jaw span while descending (the gripper approaches
    fully open and closes at the grasp point). Success requires the span to
    contain the object's grasp width, the fingers to straddle the footprint
    along the closing axis, the footprint to stay inside the descending
    jaws, and the contact patch to overlap the footprint across them.
    """
    obj = world.scene.object_by_id(object_id)
    pose_t = world.gripper_pose_table()
    center = pose_t.translation[:2]
    closing = pose_t.rotation_matrix[:2, 0]
    norm = np.linalg.norm(closing)
    if norm < 1e-9:
        return False, "closing axis vertical"
    closing = closing / norm
    perp = np.array([-closing[1], closing[0]])

    poly = obj.footprint() - center
    lo_u, hi_u = footprints.project_onto_axis(poly, closing)
    lo_v, hi_v = footprints.project_onto_axis(poly, perp)
    half = opening / 2
    eps = 1e-9
    if obj.grasp_width > opening + eps:
        return False, "object wider than jaw span"
    if lo_u > eps or hi_u < -eps:
        return False, "fingers do not straddle the object"
    if lo_u < -half - eps or hi_u > half + eps:
        return False, "fingers would collide with the object"
    contact = world.chain.gripper.contact_length / 2
    if lo_v > contact or hi_v < -contact:
        return False, "contact patch misses the object"
    return True, None


def attach_object(world: WorldState, object_id: int) -> None:
    obj = world.scene.object_by_id(object_id)
    grip_t = world.gripper_pose_table()
    rel = grip_t.invert().compose(obj.pose)
    world.held = HeldObject(object_id, rel,
                            float(grip_t.translation[2]) - obj.min_z())


def _settle_released_object(world: WorldState) -> np.ndarray:
    """Re-pose the held object from the gripper pose and drop it flat onto
    the table; returns the final center (x, y)."""
    held = world.held
    assert held is not None
    obj = world.scene.object_by_id(held.object_id)
    pose = world.gripper_pose_table().compose(held.rel_pose)
    x_axis = pose.rotate(np.array([1.0, 0, 0]))
    yaw = math.atan2(x_axis[1], x_axis[0])
    final = upright_pose(float(pose.translation[0]), float(pose.translation[1]), yaw)
    world.scene = apply_motion(world.scene, held.object_id, final)
    world.held = None
    return np.array([final.translation[0], final.translation[1]])


def execute_pick(world: WorldState, grasp: GraspPose6D,
                 object_id: int) -> PickOutcome:
    """Pregrasp, descend, close, geometric success check, lift."""
    if world.held is not None:
        raise InvalidStateError("gripper already holds an object")
    world.scene.object_by_id(object_id)  # raises UnknownObjectError early
    p = world.params
    gripper_time = world.chain.gripper.action_time
    goal_tol = dict(pos_tol=p.pos_tolerance, ori_tol=p.ori_tolerance)

    pregrasp = RigidTransform(grasp.pose.rotation,
                              grasp.pose.translation - p.pregrasp_offset * grasp.approach,
                              FrameId.ROBOT_BASE, FrameId.GRIPPER)
    segments: list[Trajectory] = []
    try:
        t1 = plan_to_pose(world.chain, world.q, PoseGoal(pregrasp, **goal_tol),
                          world.scene, world.table_from_base, p,
                          seed=world.next_seed())
        segments.append(t1)
        world.q = t1.end.copy()
        t2 = plan_to_pose(world.chain, world.q, PoseGoal(grasp.pose, **goal_tol),
                          world.scene, world.table_from_base, p,
                          seed=world.next_seed())
        segments.append(t2)
        world.q = t2.end.copy()
    except SimError as exc:
        dur = sum(s.duration for s in segments)
        return PickOutcome(False, f"planning failed: {exc}", tuple(segments), dur)

    # The gripper descends fully open and closes at the grasp point; the
    # commanded rect width governs feasibility/ranking, not the descent span.
    world.gripper_opening = world.chain.gripper.max_opening
    ok, reason = grasp_check(world, object_id, world.gripper_opening)
    duration = sum(s.duration for s in segments) + gripper_time
    if not ok:
        return PickOutcome(False, reason, tuple(segments), duration)
    attach_object(world, object_id)
    world.gripper_opening = world.scene.object_by_id(object_id).grasp_width

    up_base = world.table_from_base.invert().rotate(np.array([0.0, 0, 1.0]))
    lifted_pose = fk(world.chain, world.q)
    lift_target = RigidTransform(lifted_pose.rotation,
                                 lifted_pose.translation + p.lift_height * up_base,
                                 FrameId.ROBOT_BASE, FrameId.GRIPPER)
    try:
        t3 = plan_to_pose(world.chain, world.q, PoseGoal(lift_target, **goal_tol),
                          world.scene, world.table_from_base, p,
                          seed=world.next_seed(), held=object_id)
        segments.append(t3)
        world.q = t3.end.copy()
        duration += t3.duration
    except SimError as exc:
        # Grabbed but could not retreat: report failure with the gripper
        # still holding the object.
        return PickOutcome(False, f"lift failed: {exc}", tuple(segments), duration)
    return PickOutcome(True, None, tuple(segments), duration)


def execute_place(world: WorldState, target: np.ndarray) -> PlaceOutcome:
    """Move above the target, descend, release, settle the object."""
    if world.held is None:
        raise NoHeldObjectError("no object is held")
    p = world.params
    target = np.asarray(target, dtype=float).reshape(-1)
    tx, ty = float(target[0]), float(target[1])
    if not world.scene.reachable_region.contains_point(tx, ty):
        return PlaceOutcome(False, "target outside the reachable region",
                            None, (), 0.0)

    held_id = world.held.object_id
    z_release = world.held.tcp_height_above_bottom + p.release_drop
    current = fk(world.chain, world.q)
    base_from_table = world.table_from_base.invert()
    release_base = base_from_table.apply(np.array([tx, ty, z_release]))
    above_base = base_from_table.apply(np.array([tx, ty, z_release + p.lift_height]))
    goal_tol = dict(pos_tol=p.pos_tolerance, ori_tol=p.ori_tolerance)

    segments: list[Trajectory] = []
    try:
        t1 = plan_to_pose(world.chain, world.q,
                          PoseGoal(RigidTransform(current.rotation, above_base,
                                                  FrameId.ROBOT_BASE, FrameId.GRIPPER),
                                   **goal_tol),
                          world.scene, world.table_from_base, p,
                          seed=world.next_seed(), held=held_id)
        segments.append(t1)
        world.q = t1.end.copy()
        t2 = plan_to_pose(world.chain, world.q,
                          PoseGoal(RigidTransform(current.rotation, release_base,
                                                  FrameId.ROBOT_BASE, FrameId.GRIPPER),
                                   **goal_tol),
                          world.scene, world.table_from_base, p,
                          seed=world.next_seed(), held=held_id)
        segments.append(t2)
        world.q = t2.end.copy()
    except UnreachableGoalError as exc:
        dur = sum(s.duration for s in segments)
        return PlaceOutcome(False, f"unreachable: {exc}", None, tuple(segments), dur)
    except SimError as exc:
        dur = sum(s.duration for s in segments)
        return PlaceOutcome(False, f"planning failed: {exc}", None,
                            tuple(segments), dur)

    final_center = _settle_released_object(world)
    world.gripper_opening = world.chain.gripper.max_opening
    duration = sum(s.duration for s in segments) + world.chain.gripper.action_time
    return PlaceOutcome(True, None, final_center, tuple(segments), duration)
