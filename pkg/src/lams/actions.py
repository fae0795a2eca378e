"""Action-space algebra: direction groups, mode mappings, joystick-to-robot application.

Frame and sign conventions live here as single constants; every other module
(simulator, grounding, scripted user) reads them from this module so a change
stays consistent across the codebase.

Frame: right-handed, x forward, y left, z up. Angles are degrees in [0, 360).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum


def wrap_angle(deg: float) -> float:
    """Normalize an angle in degrees to [0, 360)."""
    return deg % 360.0


def shortest_arc(from_deg: float, to_deg: float) -> float:
    """Signed shortest angular difference to_deg - from_deg, in [-180, 180)."""
    return (to_deg - from_deg + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class Pose6:
    """End-effector or object pose: position in meters, Euler angles in degrees."""

    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float

    def __post_init__(self):
        for name in ("x", "y", "z", "roll", "pitch", "yaw"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite pose component {name}={v}")
        object.__setattr__(self, "roll", wrap_angle(self.roll))
        object.__setattr__(self, "pitch", wrap_angle(self.pitch))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def translated(self, dx: float, dy: float, dz: float) -> "Pose6":
        return replace(self, x=self.x + dx, y=self.y + dy, z=self.z + dz)

    def rotated(self, droll: float, dpitch: float, dyaw: float) -> "Pose6":
        return replace(
            self,
            roll=wrap_angle(self.roll + droll),
            pitch=wrap_angle(self.pitch + dpitch),
            yaw=wrap_angle(self.yaw + dyaw),
        )

    def position_distance(self, other: "Pose6") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )

    def max_angle_distance(self, other: "Pose6") -> float:
        return max(
            abs(shortest_arc(self.roll, other.roll)),
            abs(shortest_arc(self.pitch, other.pitch)),
            abs(shortest_arc(self.yaw, other.yaw)),
        )

    def to_dict(self) -> dict:
        return {
            "x": self.x, "y": self.y, "z": self.z,
            "roll": self.roll, "pitch": self.pitch, "yaw": self.yaw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pose6":
        return cls(d["x"], d["y"], d["z"], d["roll"], d["pitch"], d["yaw"])


class ActionDirection(Enum):
    """The 14 robot action directions selectable through the joystick."""

    MOVE_FORWARD = "move_forward"
    MOVE_BACKWARD = "move_backward"
    MOVE_UP = "move_up"
    MOVE_DOWN = "move_down"
    MOVE_LEFT = "move_left"
    MOVE_RIGHT = "move_right"
    PITCH_UP = "pitch_up"
    PITCH_DOWN = "pitch_down"
    ROLL_LEFT = "roll_left"
    ROLL_RIGHT = "roll_right"
    YAW_LEFT = "yaw_left"
    YAW_RIGHT = "yaw_right"
    OPEN_GRIPPER = "open_gripper"
    CLOSE_GRIPPER = "close_gripper"


class DirectionGroup(Enum):
    """Candidate direction groups for each joystick movement direction."""

    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"

    @property
    def number(self) -> int:
        return _GROUP_NUMBER[self]

    @property
    def members(self) -> tuple[ActionDirection, ...]:
        """Group members in canonical letter order (A, B, C[, D])."""
        return GROUP_MEMBERS[self]

    @property
    def letters(self) -> str:
        return "ABCD"[: len(GROUP_MEMBERS[self])]

    @property
    def axis(self) -> str:
        """Joystick axis driving this group: 'longitudinal' or 'lateral'."""
        return "longitudinal" if self in (DirectionGroup.UP, DirectionGroup.DOWN) else "lateral"

    @property
    def engage_sign(self) -> int:
        """Sign of the axis value that engages this group's slot."""
        return +1 if self in (DirectionGroup.UP, DirectionGroup.RIGHT) else -1


_GROUP_NUMBER = {
    DirectionGroup.UP: 1,
    DirectionGroup.DOWN: 2,
    DirectionGroup.LEFT: 3,
    DirectionGroup.RIGHT: 4,
}

GROUP_BY_NUMBER = {n: g for g, n in _GROUP_NUMBER.items()}

# Letter order matters: it is the prompt's A/B/C/D order and the manual-press
# cycling order.
GROUP_MEMBERS: dict[DirectionGroup, tuple[ActionDirection, ...]] = {
    DirectionGroup.UP: (
        ActionDirection.MOVE_FORWARD,
        ActionDirection.MOVE_UP,
        ActionDirection.PITCH_UP,
        ActionDirection.OPEN_GRIPPER,
    ),
    DirectionGroup.DOWN: (
        ActionDirection.MOVE_BACKWARD,
        ActionDirection.MOVE_DOWN,
        ActionDirection.PITCH_DOWN,
        ActionDirection.CLOSE_GRIPPER,
    ),
    DirectionGroup.LEFT: (
        ActionDirection.MOVE_LEFT,
        ActionDirection.ROLL_LEFT,
        ActionDirection.YAW_LEFT,
    ),
    DirectionGroup.RIGHT: (
        ActionDirection.MOVE_RIGHT,
        ActionDirection.ROLL_RIGHT,
        ActionDirection.YAW_RIGHT,
    ),
}

_GROUP_OF: dict[ActionDirection, DirectionGroup] = {
    d: g for g, members in GROUP_MEMBERS.items() for d in members
}

# Text used for each direction in the mode-switch prompt's group tables.
PROMPT_TEXT: dict[ActionDirection, str] = {
    ActionDirection.MOVE_FORWARD: "Move forward",
    ActionDirection.MOVE_UP: "Move up",
    ActionDirection.PITCH_UP: "Rotate up",
    ActionDirection.OPEN_GRIPPER: "Open gripper",
    ActionDirection.MOVE_BACKWARD: "Move backward",
    ActionDirection.MOVE_DOWN: "Move down",
    ActionDirection.PITCH_DOWN: "Rotate down",
    ActionDirection.CLOSE_GRIPPER: "Close gripper",
    ActionDirection.MOVE_LEFT: "Move left",
    ActionDirection.ROLL_LEFT: "Roll left",
    ActionDirection.YAW_LEFT: "Rotate left",
    ActionDirection.MOVE_RIGHT: "Move right",
    ActionDirection.ROLL_RIGHT: "Roll right",
    ActionDirection.YAW_RIGHT: "Rotate right",
}

# Plain action names, used when rendering user-correction examples
# (the GUI and the example records call pitch/yaw by their own names).
DISPLAY_NAME: dict[ActionDirection, str] = {
    ActionDirection.MOVE_FORWARD: "Move forward",
    ActionDirection.MOVE_UP: "Move up",
    ActionDirection.PITCH_UP: "Pitch up",
    ActionDirection.OPEN_GRIPPER: "Open gripper",
    ActionDirection.MOVE_BACKWARD: "Move backward",
    ActionDirection.MOVE_DOWN: "Move down",
    ActionDirection.PITCH_DOWN: "Pitch down",
    ActionDirection.CLOSE_GRIPPER: "Close gripper",
    ActionDirection.MOVE_LEFT: "Move left",
    ActionDirection.ROLL_LEFT: "Roll left",
    ActionDirection.YAW_LEFT: "Yaw left",
    ActionDirection.MOVE_RIGHT: "Move right",
    ActionDirection.ROLL_RIGHT: "Roll right",
    ActionDirection.YAW_RIGHT: "Yaw right",
}

# Which signed robot-action component each direction drives. Right-handed
# frame: +x forward, +y left, +z up; +roll rolls to the right, +pitch noses
# up, +yaw swings left; +gripper opens.
SIGN_CONVENTION: dict[ActionDirection, tuple[str, int]] = {
    ActionDirection.MOVE_FORWARD: ("dx", +1),
    ActionDirection.MOVE_BACKWARD: ("dx", -1),
    ActionDirection.MOVE_UP: ("dz", +1),
    ActionDirection.MOVE_DOWN: ("dz", -1),
    ActionDirection.MOVE_LEFT: ("dy", +1),
    ActionDirection.MOVE_RIGHT: ("dy", -1),
    ActionDirection.PITCH_UP: ("dpitch", +1),
    ActionDirection.PITCH_DOWN: ("dpitch", -1),
    ActionDirection.ROLL_LEFT: ("droll", -1),
    ActionDirection.ROLL_RIGHT: ("droll", +1),
    ActionDirection.YAW_LEFT: ("dyaw", +1),
    ActionDirection.YAW_RIGHT: ("dyaw", -1),
    ActionDirection.OPEN_GRIPPER: ("dgripper", +1),
    ActionDirection.CLOSE_GRIPPER: ("dgripper", -1),
}

TRANSLATION_COMPONENTS = ("dx", "dy", "dz")
ROTATION_COMPONENTS = ("droll", "dpitch", "dyaw")


class InvalidLetter(ValueError):
    """Letter not valid for the requested group (e.g. D in a 3-member group)."""


@dataclass(frozen=True)
class CanonicalLabel:
    """A direction's identity in the prompt: group number, letter, prompt text."""

    group: DirectionGroup
    letter: str
    text: str


def group_of(direction: ActionDirection) -> DirectionGroup:
    return _GROUP_OF[direction]


def label_of(direction: ActionDirection) -> CanonicalLabel:
    group = _GROUP_OF[direction]
    letter = group.letters[group.members.index(direction)]
    return CanonicalLabel(group, letter, PROMPT_TEXT[direction])


def direction_of(group: DirectionGroup, letter: str) -> ActionDirection:
    idx = "ABCD".find(letter.upper())
    if idx < 0 or idx >= len(group.members):
        raise InvalidLetter(f"letter {letter!r} not valid for group {group.number}")
    return group.members[idx]


def cycle_next(direction: ActionDirection) -> ActionDirection:
    """Next direction in the group's A->B->C(->D) cycling order."""
    members = _GROUP_OF[direction].members
    return members[(members.index(direction) + 1) % len(members)]


def cycle_distance(from_dir: ActionDirection, to_dir: ActionDirection) -> int:
    """Number of single-slot presses to cycle from one direction to another."""
    members = _GROUP_OF[from_dir].members
    if _GROUP_OF[to_dir] is not _GROUP_OF[from_dir]:
        raise ValueError("cycle distance only defined within one group")
    return (members.index(to_dir) - members.index(from_dir)) % len(members)


def _clamp(v: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, v))


@dataclass(frozen=True)
class UserAction:
    """2-DoF joystick sample; components are clamped to [-1, 1]."""

    lateral: float = 0.0
    longitudinal: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lateral", _clamp(float(self.lateral), -1.0, 1.0))
        object.__setattr__(self, "longitudinal", _clamp(float(self.longitudinal), -1.0, 1.0))

    @property
    def is_zero(self) -> bool:
        return self.lateral == 0.0 and self.longitudinal == 0.0


ZERO_ACTION = UserAction(0.0, 0.0)


@dataclass(frozen=True)
class RobotAction:
    """7-dimensional robot action: translation m, rotation deg, gripper fraction."""

    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    droll: float = 0.0
    dpitch: float = 0.0
    dyaw: float = 0.0
    dgripper: float = 0.0

    def components(self) -> dict[str, float]:
        return {
            "dx": self.dx, "dy": self.dy, "dz": self.dz,
            "droll": self.droll, "dpitch": self.dpitch, "dyaw": self.dyaw,
            "dgripper": self.dgripper,
        }

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.components().values())


@dataclass(frozen=True)
class VelocityProfile:
    """Per-tick full-deflection speeds for translation, rotation and gripper."""

    v_tr: float = 0.01   # meters per tick
    v_ro: float = 3.0    # degrees per tick
    v_gr: float = 0.1    # aperture fraction per tick

    def __post_init__(self):
        if self.v_tr <= 0 or self.v_ro <= 0 or self.v_gr <= 0:
            raise ValueError("velocity profile components must be strictly positive")

    def for_direction(self, direction: ActionDirection) -> float:
        component, _ = SIGN_CONVENTION[direction]
        if component in TRANSLATION_COMPONENTS:
            return self.v_tr
        if component in ROTATION_COMPONENTS:
            return self.v_ro
        return self.v_gr


@dataclass(frozen=True)
class ModeMapping:
    """Current assignment of the four joystick directions to robot actions.

    Slots may be None only for the grouped-mapping baseline's lateral-free
    group; every strategy that fills slots individually keeps all four set.
    """

    up: ActionDirection | None
    down: ActionDirection | None
    left: ActionDirection | None
    right: ActionDirection | None

    def __post_init__(self):
        for slot, group in (
            ("up", DirectionGroup.UP), ("down", DirectionGroup.DOWN),
            ("left", DirectionGroup.LEFT), ("right", DirectionGroup.RIGHT),
        ):
            d = getattr(self, slot)
            if d is not None and _GROUP_OF[d] is not group:
                raise ValueError(f"{d} cannot occupy the {slot} slot")

    def slot(self, group: DirectionGroup) -> ActionDirection | None:
        return getattr(self, group.value)

    def with_slot(self, group: DirectionGroup, direction: ActionDirection) -> "ModeMapping":
        return replace(self, **{group.value: direction})

    def exposes(self, direction: ActionDirection) -> bool:
        return self.slot(_GROUP_OF[direction]) is direction

    def to_dict(self) -> dict:
        return {g.value: (d.value if d else None) for g in DirectionGroup for d in [self.slot(g)]}

    @classmethod
    def from_dict(cls, d: dict) -> "ModeMapping":
        return cls(**{
            k: (ActionDirection(v) if v else None)
            for k, v in d.items()
        })


def apply_mode(mode: ModeMapping, a_u: UserAction, velocities: VelocityProfile) -> RobotAction:
    """Map a joystick sample through the active mode to a robot action.

    Positive longitudinal deflection engages the up slot, negative the down
    slot; positive lateral engages right, negative left. Each engaged slot
    writes its direction's signed delta (per SIGN_CONVENTION) scaled by the
    deflection magnitude and the matching velocity.
    """
    components: dict[str, float] = {}
    engagements = (
        (a_u.longitudinal, mode.up if a_u.longitudinal > 0 else mode.down),
        (a_u.lateral, mode.right if a_u.lateral > 0 else mode.left),
    )
    for axis_value, direction in engagements:
        if axis_value == 0.0 or direction is None:
            continue
        component, sign = SIGN_CONVENTION[direction]
        components[component] = sign * abs(axis_value) * velocities.for_direction(direction)
    return RobotAction(**components)


def engaged_directions(mode: ModeMapping, a_u: UserAction) -> list[ActionDirection]:
    """Directions actually driven by a joystick sample under a mode."""
    out = []
    if a_u.longitudinal > 0 and mode.up is not None:
        out.append(mode.up)
    elif a_u.longitudinal < 0 and mode.down is not None:
        out.append(mode.down)
    if a_u.lateral > 0 and mode.right is not None:
        out.append(mode.right)
    elif a_u.lateral < 0 and mode.left is not None:
        out.append(mode.left)
    return out


def direction_for_delta(component: str, sign: int) -> ActionDirection:
    """Inverse of SIGN_CONVENTION: which direction produces a signed component delta."""
    for d, (c, s) in SIGN_CONVENTION.items():
        if c == component and s == sign:
            return d
    raise KeyError(f"no direction for {component} sign {sign}")
