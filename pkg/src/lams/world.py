"""Deterministic kinematic world: pose integration, grasping, pause detection.

The world stands in for the physical arm and tabletop. No physics beyond
rigid attachment, workspace clipping and settle-on-release; stepping is a
pure function of (state, action) so identical action sequences reproduce
identical states bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .actions import Pose6, RobotAction, UserAction, wrap_angle
from .config import REST_Z, SessionClock, SimConfig


@dataclass(frozen=True)
class ObjectState:
    id: str
    kind: str
    pose: Pose6
    held: bool = False
    dropped: bool = False
    was_held: bool = False          # latched at first grasp
    lift_peak: float = 0.0          # highest z reached while held
    initial_pose: Pose6 | None = None
    grip_offset: tuple[float, ...] | None = None  # (dx,dy,dz,droll,dpitch,dyaw) vs ee

    def __post_init__(self):
        if self.held and self.dropped:
            raise ValueError("object cannot be both held and dropped")
        if self.initial_pose is None:
            object.__setattr__(self, "initial_pose", self.pose)
        if self.lift_peak == 0.0:
            object.__setattr__(self, "lift_peak", self.pose.z)

    @property
    def display_name(self) -> str:
        return self.kind.replace("_", " ")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "pose": self.pose.to_dict(),
            "held": self.held,
            "dropped": self.dropped,
            "was_held": self.was_held,
            "lift_peak": self.lift_peak,
            "initial_pose": self.initial_pose.to_dict(),
            "grip_offset": list(self.grip_offset) if self.grip_offset else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectState":
        return cls(
            id=d["id"],
            kind=d["kind"],
            pose=Pose6.from_dict(d["pose"]),
            held=d["held"],
            dropped=d["dropped"],
            was_held=d["was_held"],
            lift_peak=d["lift_peak"],
            initial_pose=Pose6.from_dict(d["initial_pose"]),
            grip_offset=tuple(d["grip_offset"]) if d.get("grip_offset") else None,
        )


@dataclass(frozen=True)
class WorldState:
    ee_pose: Pose6
    gripper_aperture: float
    objects: tuple[ObjectState, ...]
    tick: int = 0
    task_layout_seed: int = 0
    clipped: bool = False  # last step hit the workspace boundary

    @property
    def gripper_closed(self) -> bool:
        return self.gripper_aperture < 0.5

    @property
    def gripper_state(self) -> str:
        return "closed" if self.gripper_closed else "open"

    @property
    def held_object(self) -> ObjectState | None:
        for obj in self.objects:
            if obj.held:
                return obj
        return None

    def object(self, obj_id: str) -> ObjectState:
        for obj in self.objects:
            if obj.id == obj_id:
                return obj
        raise KeyError(obj_id)

    def to_dict(self) -> dict:
        return {
            "ee_pose": self.ee_pose.to_dict(),
            "gripper_aperture": self.gripper_aperture,
            "objects": [o.to_dict() for o in self.objects],
            "tick": self.tick,
            "task_layout_seed": self.task_layout_seed,
            "clipped": self.clipped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldState":
        return cls(
            ee_pose=Pose6.from_dict(d["ee_pose"]),
            gripper_aperture=d["gripper_aperture"],
            objects=tuple(ObjectState.from_dict(o) for o in d["objects"]),
            tick=d["tick"],
            task_layout_seed=d["task_layout_seed"],
            clipped=d["clipped"],
        )


@dataclass(frozen=True)
class StepEvents:
    """Kinematic transitions produced by one step, for triggers and metrics."""

    gripper_closed: bool = False
    gripper_opened: bool = False
    grasped: str | None = None
    released: str | None = None
    dropped: str | None = None


def _clip(v: float, lo: float, hi: float) -> tuple[float, bool]:
    if v < lo:
        return lo, True
    if v > hi:
        return hi, True
    return v, False


def step(world: WorldState, action: RobotAction, cfg: SimConfig) -> tuple[WorldState, StepEvents]:
    """Advance the world by one tick under a robot action."""
    ee = world.ee_pose
    x, cx = _clip(ee.x + action.dx, cfg.workspace_min[0], cfg.workspace_max[0])
    y, cy = _clip(ee.y + action.dy, cfg.workspace_min[1], cfg.workspace_max[1])
    z, cz = _clip(ee.z + action.dz, cfg.workspace_min[2], cfg.workspace_max[2])
    new_ee = Pose6(
        x, y, z,
        wrap_angle(ee.roll + action.droll),
        wrap_angle(ee.pitch + action.dpitch),
        wrap_angle(ee.yaw + action.dyaw),
    )
    aperture = max(0.0, min(1.0, world.gripper_aperture + action.dgripper))

    was_closed = world.gripper_aperture < cfg.close_threshold
    now_closed = aperture < cfg.close_threshold
    closing = now_closed and not was_closed
    opening = was_closed and not now_closed

    objects = list(world.objects)
    events = StepEvents(gripper_closed=closing, gripper_opened=opening)

    # Held objects ride with the end effector.
    for i, obj in enumerate(objects):
        if obj.held and obj.grip_offset is not None:
            off = obj.grip_offset
            pose = Pose6(
                new_ee.x + off[0], new_ee.y + off[1], new_ee.z + off[2],
                wrap_angle(new_ee.roll + off[3]),
                wrap_angle(new_ee.pitch + off[4]),
                wrap_angle(new_ee.yaw + off[5]),
            )
            objects[i] = replace(obj, pose=pose, lift_peak=max(obj.lift_peak, pose.z))

    if closing:
        objects, events = _try_grasp(objects, new_ee, cfg, events)
    if opening:
        objects, events = _release(objects, cfg, events)

    new_world = WorldState(
        ee_pose=new_ee,
        gripper_aperture=aperture,
        objects=tuple(objects),
        tick=world.tick + 1,
        task_layout_seed=world.task_layout_seed,
        clipped=cx or cy or cz,
    )
    return new_world, events


def _try_grasp(objects, ee: Pose6, cfg: SimConfig, events: StepEvents):
    best_i, best_dist = None, None
    for i, obj in enumerate(objects):
        if obj.kind == "shelf":
            continue
        dist = obj.pose.position_distance(ee)
        if dist > cfg.grasp_position_tol:
            continue
        if obj.pose.max_angle_distance(ee) > cfg.grasp_angle_tol:
            continue
        if best_dist is None or dist < best_dist:
            best_i, best_dist = i, dist
    if best_i is None:
        return objects, events
    obj = objects[best_i]
    offset = (
        obj.pose.x - ee.x, obj.pose.y - ee.y, obj.pose.z - ee.z,
        (obj.pose.roll - ee.roll) % 360.0,
        (obj.pose.pitch - ee.pitch) % 360.0,
        (obj.pose.yaw - ee.yaw) % 360.0,
    )
    objects[best_i] = replace(
        obj, held=True, dropped=False, was_held=True,
        grip_offset=offset, lift_peak=max(obj.lift_peak, obj.pose.z),
    )
    return objects, replace(events, grasped=obj.id)


def _release(objects, cfg: SimConfig, events: StepEvents):
    for i, obj in enumerate(objects):
        if not obj.held:
            continue
        displaced = obj.pose.position_distance(obj.initial_pose) > cfg.drop_displacement
        settled = replace(obj.pose, z=REST_Z.get(obj.kind, obj.pose.z))
        new = replace(
            obj, held=False, grip_offset=None,
            dropped=displaced or obj.dropped, pose=settled,
        )
        objects[i] = new
        events = replace(events, released=obj.id, dropped=obj.id if new.dropped else None)
    return objects, events


def apply_mode_step(world: WorldState, mode, a_u: UserAction,
                    cfg: SimConfig) -> tuple[WorldState, StepEvents]:
    """Convenience: map a joystick sample through the mode and step the world."""
    from .actions import apply_mode

    return step(world, apply_mode(mode, a_u, cfg.velocities), cfg)


class PauseDetector:
    """Edge-triggered stillness detector.

    Fires exactly once when the run of consecutive all-zero samples reaches the
    pause window; any nonzero sample re-arms it.
    """

    def __init__(self, clock: SessionClock):
        self.window = clock.pause_window_ticks
        self._zero_run = 0

    def update(self, sample: UserAction) -> bool:
        if sample.is_zero:
            self._zero_run += 1
            return self._zero_run == self.window
        self._zero_run = 0
        return False

    def reset(self):
        self._zero_run = 0


def detect_pause(history: list[UserAction], clock: SessionClock) -> bool:
    """Pure-function view of PauseDetector over a full input history."""
    run = 0
    for sample in history:
        run = run + 1 if sample.is_zero else 0
    return run == clock.pause_window_ticks
