"""Task definitions: layouts, stage checkpoints, and scripted-user waypoint plans.

Stage predicates are written cumulatively (latched grasp flags, lift peaks)
so a trial's progress index is monotone; the TaskProgress tracker latches the
prefix as it fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Callable

from .actions import Pose6, shortest_arc
from .config import SimConfig
from .world import ObjectState, WorldState

POUR_ROLL_DELTA = 60.0     # degrees of roll away from upright that count as pouring
SLOT_ALIGN_TOL = 0.04      # meters, shelf-slot lateral alignment
SLOT_YAW_TOL = 15.0        # degrees
BOWL_LATERAL_TOL = 0.05    # meters, bottle-over-bowl
LIFT_HEIGHT = 0.10         # meters
SHELF_FRONT_OFFSET = 0.03  # shelf front plane sits this far before the slot center


@dataclass(frozen=True)
class Stage:
    name: str
    predicate: Callable[[WorldState], bool]


@dataclass(frozen=True)
class Waypoint:
    """A scripted-user goal: pose component targets plus an optional gripper op."""

    name: str
    position: dict[str, float] = field(default_factory=dict)       # x/y/z -> meters
    orientation: dict[str, float] = field(default_factory=dict)    # roll/pitch/yaw -> deg
    position_tol: float = 0.02
    orientation_tol: float = 10.0
    gripper: str | None = None                                     # "open" | "closed"


@dataclass(frozen=True)
class TaskSpec:
    name: str
    task_line: str
    object_order: tuple[str, ...]
    stages: tuple[Stage, ...]
    make_layout: Callable[[int], WorldState]
    make_plan: Callable[[WorldState], tuple[Waypoint, ...]]


class UnknownTask(KeyError):
    pass


def _aligned(world: WorldState, obj: ObjectState, cfg: SimConfig) -> bool:
    return (
        obj.pose.position_distance(world.ee_pose) <= cfg.grasp_position_tol
        and obj.pose.max_angle_distance(world.ee_pose) <= cfg.grasp_angle_tol
    )


class TaskProgress:
    """Latches the highest contiguous prefix of satisfied stage checkpoints."""

    def __init__(self, spec: TaskSpec, cfg: SimConfig):
        self.spec = spec
        self.cfg = cfg
        self.index = 0

    def update(self, world: WorldState) -> tuple[int, bool]:
        while self.index < len(self.spec.stages):
            if not self.spec.stages[self.index].predicate(world):
                break
            self.index += 1
        return self.index, self.index == len(self.spec.stages)

    @property
    def completed(self) -> bool:
        return self.index == len(self.spec.stages)


def task_progress(world: WorldState, spec: TaskSpec) -> tuple[int, bool]:
    """Instantaneous contiguous-prefix evaluation of the stage predicates."""
    index = 0
    for stage in spec.stages:
        if not stage.predicate(world):
            break
        index += 1
    return index, index == len(spec.stages)


# --- water pouring -----------------------------------------------------------

WATER_TASK_LINE = (
    "Open the cap of a bottle, then pick up the bottle and pour what's inside into a bowl."
)


def _water_layout(seed: int) -> WorldState:
    rng = Random(seed)
    bx = 0.50 + rng.uniform(-0.04, 0.04)
    by = 0.25 + rng.uniform(-0.04, 0.04)
    cap_pitch = rng.uniform(22.0, 30.0)
    bowl_x = 0.58 + rng.uniform(-0.04, 0.04)
    bowl_y = 0.45 + rng.uniform(-0.04, 0.04)
    objects = (
        ObjectState("bottle_cap", "bottle_cap", Pose6(bx, by, 0.20, 180, cap_pitch, 90)),
        ObjectState("bottle", "bottle", Pose6(bx, by, 0.10, 180, 0, 90)),
        ObjectState("bowl", "bowl", Pose6(bowl_x, bowl_y, 0.04, 180, 0, 90)),
    )
    return WorldState(
        ee_pose=Pose6(0.40, 0.35, 0.30, 180, 0, 90),
        gripper_aperture=1.0,
        objects=objects,
        task_layout_seed=seed,
    )


def _water_plan(world: WorldState) -> tuple[Waypoint, ...]:
    cap = world.object("bottle_cap")
    bottle = world.object("bottle")
    bowl = world.object("bowl")
    aside_x = cap.pose.x - 0.15
    return (
        Waypoint("above_cap", position={"x": cap.pose.x, "y": cap.pose.y},
                 position_tol=0.015),
        Waypoint("align_cap", orientation={"pitch": cap.pose.pitch}),
        Waypoint("descend_cap", position={"z": cap.pose.z}, position_tol=0.015),
        Waypoint("grasp_cap", gripper="closed"),
        Waypoint("lift_cap", position={"z": cap.pose.z + 0.15}),
        Waypoint("cap_aside", position={"x": aside_x}, position_tol=0.03),
        Waypoint("release_cap", gripper="open"),
        Waypoint("level_pitch", orientation={"pitch": bottle.pose.pitch}),
        Waypoint("above_bottle", position={"x": bottle.pose.x, "y": bottle.pose.y},
                 position_tol=0.015),
        Waypoint("descend_bottle", position={"z": bottle.pose.z}, position_tol=0.015),
        Waypoint("grasp_bottle", gripper="closed"),
        Waypoint("lift_bottle", position={"z": 0.30}),
        Waypoint("above_bowl", position={"x": bowl.pose.x, "y": bowl.pose.y},
                 position_tol=0.02),
        Waypoint("pour", orientation={"roll": 110.0}, orientation_tol=8.0),
    )


def _water_stages(cfg: SimConfig) -> tuple[Stage, ...]:
    def above_bowl(w: WorldState) -> bool:
        bottle, bowl = w.object("bottle"), w.object("bowl")
        lateral = math.hypot(bottle.pose.x - bowl.pose.x, bottle.pose.y - bowl.pose.y)
        return bottle.held and lateral <= BOWL_LATERAL_TOL and bottle.pose.z >= bowl.pose.z + 0.04

    return (
        Stage("align_cap", lambda w: w.object("bottle_cap").was_held
              or _aligned(w, w.object("bottle_cap"), cfg)),
        Stage("grasp_cap", lambda w: w.object("bottle_cap").was_held),
        Stage("lift_cap", lambda w: w.object("bottle_cap").lift_peak
              - w.object("bottle_cap").initial_pose.z >= LIFT_HEIGHT),
        Stage("cap_off", lambda w: w.object("bottle_cap").dropped),
        Stage("align_bottle", lambda w: w.object("bottle").was_held
              or _aligned(w, w.object("bottle"), cfg)),
        Stage("grasp_bottle", lambda w: w.object("bottle").was_held),
        Stage("above_bowl", above_bowl),
        Stage("pour", lambda w: above_bowl(w) and abs(shortest_arc(
            w.object("bottle").initial_pose.roll, w.object("bottle").pose.roll)) >= POUR_ROLL_DELTA),
    )


# --- book storage ------------------------------------------------------------

BOOK_TASK_LINE = (
    "Pick up a book lying on the table with its spine facing up, then put it into a bookshelf."
)

SHELF_SLOT = Pose6(0.70, 0.55, 0.15, 180, 0, 90)


def _book_layout(seed: int) -> WorldState:
    rng = Random(seed)
    bx = 0.50 + rng.uniform(-0.04, 0.04)
    by = 0.28 + rng.uniform(-0.04, 0.04)
    yaw_off = rng.choice([-1, 1]) * rng.uniform(20.0, 35.0)
    book_pitch = 360.0 - rng.uniform(22.0, 30.0)
    objects = (
        ObjectState("book", "book", Pose6(bx, by, 0.03, 180, book_pitch, 90 + yaw_off)),
        ObjectState("shelf", "shelf", SHELF_SLOT),
    )
    return WorldState(
        ee_pose=Pose6(0.40, 0.35, 0.30, 180, 0, 90),
        gripper_aperture=1.0,
        objects=objects,
        task_layout_seed=seed,
    )


def _book_plan(world: WorldState) -> tuple[Waypoint, ...]:
    book = world.object("book")
    slot = world.object("shelf").pose
    return (
        Waypoint("above_book", position={"x": book.pose.x, "y": book.pose.y},
                 position_tol=0.015),
        Waypoint("align_book", orientation={"pitch": book.pose.pitch, "yaw": book.pose.yaw},
                 orientation_tol=5.0),
        Waypoint("descend_book", position={"z": book.pose.z}, position_tol=0.015),
        Waypoint("grasp_book", gripper="closed"),
        Waypoint("lift_book", position={"z": 0.30}),
        Waypoint("level_pitch", orientation={"pitch": 0.0}),
        Waypoint("align_slot", position={"y": slot.y, "z": slot.z},
                 orientation={"yaw": slot.yaw}, orientation_tol=5.0),
        Waypoint("insert", position={"x": slot.x + 0.01}),
    )


def _book_stages(cfg: SimConfig) -> tuple[Stage, ...]:
    def slot_aligned(w: WorldState) -> bool:
        book = w.object("book")
        slot = w.object("shelf").pose
        return (
            book.held
            and abs(book.pose.y - slot.y) <= SLOT_ALIGN_TOL
            and abs(book.pose.z - slot.z) <= SLOT_ALIGN_TOL
            and abs(shortest_arc(slot.yaw, book.pose.yaw)) <= SLOT_YAW_TOL
        )

    return (
        Stage("align_book", lambda w: w.object("book").was_held
              or _aligned(w, w.object("book"), cfg)),
        Stage("grasp_book", lambda w: w.object("book").was_held),
        Stage("lift_book", lambda w: w.object("book").lift_peak
              - w.object("book").initial_pose.z >= LIFT_HEIGHT),
        Stage("align_slot", slot_aligned),
        Stage("insert", lambda w: slot_aligned(w)
              and w.object("book").pose.x >= w.object("shelf").pose.x - SHELF_FRONT_OFFSET),
    )


def build_task(name: str, cfg: SimConfig | None = None) -> TaskSpec:
    cfg = cfg or SimConfig()
    if name == "water_pouring":
        return TaskSpec(
            name="water_pouring",
            task_line=WATER_TASK_LINE,
            object_order=("bottle_cap", "bottle", "bowl"),
            stages=_water_stages(cfg),
            make_layout=_water_layout,
            make_plan=_water_plan,
        )
    if name == "book_storage":
        return TaskSpec(
            name="book_storage",
            task_line=BOOK_TASK_LINE,
            object_order=("book", "shelf"),
            stages=_book_stages(cfg),
            make_layout=_book_layout,
            make_plan=_book_plan,
        )
    raise UnknownTask(name)


TASK_NAMES = ("water_pouring", "book_storage")
