"""Deterministic stand-in for a human operator.

Follows the task's waypoint plan one axis at a time: drives the needed
direction when the current mode exposes it, otherwise pauses once to request
an automatic switch, and falls back to manual slot presses when the switch
does not produce the needed direction.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..actions import (
    ActionDirection,
    DirectionGroup,
    ModeMapping,
    UserAction,
    VelocityProfile,
    direction_for_delta,
    group_of,
    shortest_arc,
)
from ..tasks import Waypoint
from ..world import WorldState

_POSITION_AXES = ("x", "y", "z")
_ANGLE_AXES = ("roll", "pitch", "yaw")
_AXIS_COMPONENT = {"x": "dx", "y": "dy", "z": "dz",
                   "roll": "droll", "pitch": "dpitch", "yaw": "dyaw"}


@dataclass(frozen=True)
class Drive:
    direction: ActionDirection
    action: UserAction


@dataclass(frozen=True)
class Pause:
    direction: ActionDirection


@dataclass(frozen=True)
class ManualSwitch:
    slot: DirectionGroup
    target: ActionDirection


@dataclass(frozen=True)
class Done:
    pass


Decision = Drive | Pause | ManualSwitch | Done


class PlanStuck(RuntimeError):
    pass


def waypoint_need(world: WorldState, wp: Waypoint, velocities: VelocityProfile,
                  sticky_axis: tuple[str, str] | None = None,
                  ) -> tuple[ActionDirection, float, tuple[str, str]] | None:
    """Needed direction, deflection magnitude and driven axis for one waypoint.

    Priority: position error first (largest out-of-tolerance axis), then
    orientation, then the gripper. A sticky axis from the previous decision is
    kept until it falls inside tolerance so two large errors do not leapfrog
    each other tick by tick.
    """
    ee = world.ee_pose
    position_errors = {}
    for axis, target in wp.position.items():
        err = target - getattr(ee, axis)
        if abs(err) > wp.position_tol:
            position_errors[axis] = err
    angle_errors = {}
    for axis, target in wp.orientation.items():
        err = shortest_arc(getattr(ee, axis), target)
        if abs(err) > wp.orientation_tol:
            angle_errors[axis] = err

    if sticky_axis is not None:
        kind, axis = sticky_axis
        if kind == "position" and axis in position_errors:
            err = position_errors[axis]
            direction = direction_for_delta(_AXIS_COMPONENT[axis], 1 if err > 0 else -1)
            return direction, min(1.0, abs(err) / velocities.v_tr), sticky_axis
        if kind == "orientation" and axis in angle_errors:
            err = angle_errors[axis]
            direction = direction_for_delta(_AXIS_COMPONENT[axis], 1 if err > 0 else -1)
            return direction, min(1.0, abs(err) / velocities.v_ro), sticky_axis

    if position_errors:
        axis = max(position_errors,
                   key=lambda a: (abs(position_errors[a]), -_POSITION_AXES.index(a)))
        err = position_errors[axis]
        direction = direction_for_delta(_AXIS_COMPONENT[axis], 1 if err > 0 else -1)
        return direction, min(1.0, abs(err) / velocities.v_tr), ("position", axis)

    if angle_errors:
        axis = max(angle_errors,
                   key=lambda a: (abs(angle_errors[a]), -_ANGLE_AXES.index(a)))
        err = angle_errors[axis]
        direction = direction_for_delta(_AXIS_COMPONENT[axis], 1 if err > 0 else -1)
        return direction, min(1.0, abs(err) / velocities.v_ro), ("orientation", axis)

    if wp.gripper is not None and world.gripper_state != wp.gripper:
        direction = (ActionDirection.CLOSE_GRIPPER if wp.gripper == "closed"
                     else ActionDirection.OPEN_GRIPPER)
        return direction, 1.0, ("gripper", "gripper")

    return None


class ScriptedUser:
    def __init__(self, plan: tuple[Waypoint, ...], velocities: VelocityProfile,
                 patience: int = 1):
        self.plan = plan
        self.velocities = velocities
        self.patience = patience
        self.waypoint_index = 0
        self._sticky: tuple[str, str] | None = None
        self._pause_attempts: dict[tuple[int, ActionDirection], int] = {}

    def _current(self, world: WorldState) -> tuple[ActionDirection, float] | None:
        while self.waypoint_index < len(self.plan):
            need = waypoint_need(world, self.plan[self.waypoint_index],
                                 self.velocities, self._sticky)
            if need is not None:
                direction, magnitude, axis = need
                self._sticky = axis
                return direction, magnitude
            self.waypoint_index += 1
            self._sticky = None
        return None

    def current_need(self, world: WorldState) -> ActionDirection | None:
        need = self._current(world)
        return need[0] if need else None

    def note_auto_switch(self, world: WorldState):
        """Record that a pause-triggered switch attempt happened for the current need."""
        need = self._current(world)
        if need is None:
            return
        key = (self.waypoint_index, need[0])
        self._pause_attempts[key] = self._pause_attempts.get(key, 0) + 1

    def decide(self, world: WorldState, mode: ModeMapping) -> Decision:
        need = self._current(world)
        if need is None:
            return Done()
        direction, magnitude = need
        group = group_of(direction)
        if mode.slot(group) is direction:
            axis_value = group.engage_sign * magnitude
            if group.axis == "longitudinal":
                action = UserAction(0.0, axis_value)
            else:
                action = UserAction(axis_value, 0.0)
            return Drive(direction, action)
        key = (self.waypoint_index, direction)
        if self._pause_attempts.get(key, 0) < self.patience:
            return Pause(direction)
        return ManualSwitch(group, direction)
