"""State grounding: discretization, relative-pose statements, prompt assembly.

The rendered pose section reproduces the checked-in prompt layout exactly
(fixed key order, fixed indentation) so prompts are byte-stable. The
orientation vocabulary is reproduced verbatim from the prompt asset, including
its idiosyncratic "close" phrasing for yaw.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources

from .actions import Pose6, shortest_arc
from .world import ObjectState, WorldState

POSITION_QUANTUM_CM = 5
ANGLE_QUANTUM_DEG = 15
CLOSE_CM = 5.0
CLOSE_DEG = 15.0

PROMPT_MODES = ("lams", "static", "num_state", "direct_examples")


def _load_asset(name: str) -> str:
    return resources.files("lams.assets").joinpath(name).read_text(encoding="utf-8")


def mode_switch_prefix() -> str:
    return _load_asset("mode_switch_prefix.txt")


def rule_gen_prefix() -> str:
    return _load_asset("rule_gen_prefix.txt")


def asset_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _round_to(value: float, quantum: int) -> int:
    """Round to the nearest multiple of quantum, ties away from zero."""
    sign = -1 if value < 0 else 1
    return sign * int(math.floor(abs(value) / quantum + 0.5)) * quantum


@dataclass(frozen=True)
class DiscretePose:
    """Pose quantized for prompting: cm in 5s, degrees in 15s within [0, 360)."""

    x: int
    y: int
    z: int
    roll: int
    pitch: int
    yaw: int


def discretize_pose(pose: Pose6) -> DiscretePose:
    return DiscretePose(
        x=_round_to(pose.x * 100.0, POSITION_QUANTUM_CM),
        y=_round_to(pose.y * 100.0, POSITION_QUANTUM_CM),
        z=_round_to(pose.z * 100.0, POSITION_QUANTUM_CM),
        roll=_round_to(pose.roll, ANGLE_QUANTUM_DEG) % 360,
        pitch=_round_to(pose.pitch, ANGLE_QUANTUM_DEG) % 360,
        yaw=_round_to(pose.yaw, ANGLE_QUANTUM_DEG) % 360,
    )


@dataclass(frozen=True)
class RelativeStatement:
    dimension: str
    text: str


# Closed vocabulary, keyed by dimension and the sign of (object - ee).
_POSITION_PHRASES = {
    "x": {+1: "to the forward of the robot arm", -1: "to the backward of the robot arm",
          0: "close to the robot arm along the x-axis"},
    "y": {+1: "to the left of the robot arm", -1: "to the right of the robot arm",
          0: "close to the robot arm along the y-axis"},
    "z": {+1: "above the robot arm", -1: "below the robot arm",
          0: "close to the robot arm along the z-axis"},
}
# +pitch noses up, +roll rolls right, +yaw swings left (see actions.SIGN_CONVENTION).
_ORIENTATION_PHRASES = {
    "pitch": {+1: "pitched more up compared to the robot arm",
              -1: "pitched more down compared to the robot arm",
              0: "pitch orientation is close to the robot arm's pitch orientation"},
    "roll": {+1: "rolled more right compared to the robot arm",
             -1: "rolled more left compared to the robot arm",
             0: "roll orientation is close to the robot arm's roll orientation"},
    # The "close" phrase for yaw reads "robot arm's roll orientation" in the
    # prompt asset; reproduced verbatim for fidelity with it.
    "yaw": {+1: "yawed more left compared to the robot arm",
            -1: "yawed more right compared to the robot arm",
            0: "yaw orientation is close to the robot arm's roll orientation"},
}

VOCABULARY = frozenset(
    phrase
    for table in (_POSITION_PHRASES, _ORIENTATION_PHRASES)
    for phrases in table.values()
    for phrase in phrases.values()
)


def _sign_bucket(delta: float, threshold: float) -> int:
    if abs(delta) <= threshold:
        return 0
    return 1 if delta > 0 else -1


def relative_deltas(ee: Pose6, obj: Pose6) -> dict[str, float]:
    """Object-minus-ee deltas: cm for position, shortest-arc degrees for angles."""
    return {
        "x": (obj.x - ee.x) * 100.0,
        "y": (obj.y - ee.y) * 100.0,
        "z": (obj.z - ee.z) * 100.0,
        "pitch": shortest_arc(ee.pitch, obj.pitch),
        "roll": shortest_arc(ee.roll, obj.roll),
        "yaw": shortest_arc(ee.yaw, obj.yaw),
    }


def relative_statements(ee: Pose6, obj: ObjectState) -> str | list[RelativeStatement]:
    """Six relative statements, or a holding/dropped string when they collapse."""
    if obj.held:
        return f"The robot arm is holding the {obj.display_name}."
    deltas = relative_deltas(ee, obj.pose)
    all_close = all(
        abs(deltas[d]) <= (CLOSE_CM if d in ("x", "y", "z") else CLOSE_DEG)
        for d in deltas
    )
    if all_close:
        return f"The robot arm is holding the {obj.display_name}."
    if obj.dropped:
        return "has been dropped"
    out = []
    for dim in ("x", "y", "z"):
        out.append(RelativeStatement(dim, _POSITION_PHRASES[dim][_sign_bucket(deltas[dim], CLOSE_CM)]))
    for dim in ("pitch", "roll", "yaw"):
        out.append(RelativeStatement(dim, _ORIENTATION_PHRASES[dim][_sign_bucket(deltas[dim], CLOSE_DEG)]))
    return out


@dataclass(frozen=True)
class PoseDescription:
    """Rendered building blocks of the state description fed to the model."""

    task_block: str
    robot_block: str
    objects_block: str

    def body(self) -> str:
        return f"{self.task_block}\n\n{self.robot_block}\n\n{self.objects_block}"


OUTPUT_BLOCK = (
    "- **Output (do not output any additional analysis):**\n"
    "{\n"
    '"Group 1": "A/B/C/D: {corresponding most likely action from group 1}",\n'
    '"Group 2": "A/B/C/D: {corresponding most likely action from group 2}",\n'
    '"Group 3": "A/B/C: {corresponding most likely action from group 3}",\n'
    '"Group 4": "A/B/C: {corresponding most likely action from group 4}",\n'
    "}"
)

POSE_HEADING = "### Current Task, Robot Arm State, and Object Information:"


def describe_world(world: WorldState, task_line: str, object_order: tuple[str, ...],
                   numeric: bool = False) -> PoseDescription:
    d = discretize_pose(world.ee_pose)
    robot = (
        "- **Current State of the Robot Arm:**\n"
        "{\n"
        '    "position": {\n'
        f'        "x": {d.x},\n'
        f'        "y": {d.y},\n'
        f'        "z": {d.z}\n'
        "    },\n"
        '    "orientation": {\n'
        f'        "theta x": {d.roll},\n'
        f'        "theta y": {d.pitch},\n'
        f'        "theta z": {d.yaw}\n'
        "    }\n"
        f'    "gripper": {world.gripper_state}\n'
        "}"
    )

    obj_lines = ["- **Current Object Information:**", "{"]
    for obj_id in object_order:
        obj = world.object(obj_id)
        obj_lines.append(f'    "{obj.display_name}": {{')
        rel = relative_statements(world.ee_pose, obj)
        if isinstance(rel, str):
            obj_lines.append(f'        "relative_pos":"{rel}",')
            obj_lines.append("    },")
            continue
        obj_lines.append('        "relative_pos":{')
        obj_lines.append('            "relative_position":{')
        values = {s.dimension: s.text for s in rel}
        if numeric:
            deltas = relative_deltas(world.ee_pose, obj.pose)
            values = {dim: round(deltas[dim]) for dim in deltas}
            for dim in ("x", "y", "z"):
                obj_lines.append(f'                "{dim}_relation": {values[dim]},')
        else:
            for dim in ("x", "y", "z"):
                obj_lines.append(f'                "{dim}_relation": "{values[dim]}",')
        obj_lines.append("            },")
        obj_lines.append('            "relative_orientation":{')
        if numeric:
            for dim in ("pitch", "roll", "yaw"):
                obj_lines.append(f'                "{dim}_relation": {values[dim]},')
        else:
            for dim in ("pitch", "roll", "yaw"):
                obj_lines.append(f'                "{dim}_relation": "{values[dim]}",')
        obj_lines.append("            },")
        obj_lines.append("        }")
        obj_lines.append("    },")
    obj_lines.append("}")

    return PoseDescription(
        task_block=f"- **Current Task:** {task_line}",
        robot_block=robot,
        objects_block="\n".join(obj_lines),
    )


def render_pose_section(desc: PoseDescription) -> str:
    return f"{POSE_HEADING}\n\n{desc.body()}\n\n{OUTPUT_BLOCK}"


@dataclass(frozen=True)
class PromptBundle:
    """The assembled instruction: prefix, optional rules/examples, pose state."""

    prefix: str
    rules_section: str
    pose_section: str
    mode: str

    def __post_init__(self):
        if self.mode not in PROMPT_MODES:
            raise ValueError(f"unknown prompt mode {self.mode!r}")
        if self.mode == "static" and self.rules_section:
            raise ValueError("static prompts carry no rules section")

    @property
    def text(self) -> str:
        parts = [self.prefix]
        if self.rules_section:
            parts.append(self.rules_section)
        parts.append(self.pose_section)
        return "\n\n".join(parts)


def assemble_prompt(rules_section: str, world: WorldState, task_line: str,
                    object_order: tuple[str, ...], mode: str = "lams") -> PromptBundle:
    """Build the full mode-switch instruction for the given prompting mode."""
    desc = describe_world(world, task_line, object_order, numeric=(mode == "num_state"))
    return PromptBundle(
        prefix=mode_switch_prefix(),
        rules_section="" if mode == "static" else rules_section,
        pose_section=render_pose_section(desc),
        mode=mode,
    )


def render_example(index: int, desc: PoseDescription, group_number: int,
                   letter: str, action_name: str) -> str:
    """Render a user-correction example in the example-list layout."""
    return (
        f"**Example {index}:**\n\n"
        f"{desc.body()}\n\n"
        "- **Most Likely Action(s):**\n"
        "{\n"
        f'"Group {group_number}": "{letter}: {action_name}"\n'
        "}"
    )


def normalize_lines(text: str) -> str:
    """Strip per-line trailing whitespace and outer blank lines for comparisons."""
    return "\n".join(line.rstrip() for line in text.split("\n")).strip("\n")
