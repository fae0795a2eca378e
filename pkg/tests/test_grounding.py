"""Grounding tests: discretization, vocabulary, and byte-level golden renders."""

from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st

from lams.actions import Pose6
from lams.grounding import (
    VOCABULARY,
    DiscretePose,
    assemble_prompt,
    asset_sha256,
    describe_world,
    discretize_pose,
    mode_switch_prefix,
    normalize_lines,
    relative_statements,
    render_example,
    render_pose_section,
    rule_gen_prefix,
)
from lams.world import ObjectState, WorldState

DATA = Path(__file__).parent / "data"

MODE_SWITCH_PREFIX_SHA256 = "24d7f82145ff217cdc889245be2505989cbdeedec2278cc56803f3dc0e29f045"
RULE_GEN_PREFIX_SHA256 = "03bf85abf0b96928e74e9b5669fd17f378d39e9cda4267256396f9e96c5af214"

WATER_LINE = (
    "Open the cap of a bottle, then pick up the bottle and pour what's inside into a bowl."
)


def golden_pose_world() -> WorldState:
    """World matching the checked-in pose-section instance."""
    return WorldState(
        ee_pose=Pose6(0.40, 0.35, 0.20, 180, 0, 90),
        gripper_aperture=1.0,
        objects=(
            ObjectState("bottle_cap", "bottle_cap", Pose6(0.41, 0.34, 0.21, 180, 0, 90),
                        held=True, was_held=True, grip_offset=(0.01, -0.01, 0.01, 0, 0, 0)),
            ObjectState("bottle", "bottle", Pose6(0.55, 0.20, 0.05, 175, 340, 95)),
            ObjectState("bowl", "bowl", Pose6(0.60, 0.15, 0.02, 185, 335, 85)),
        ),
    )


def test_prompt_asset_hashes_pinned():
    assert asset_sha256(mode_switch_prefix()) == MODE_SWITCH_PREFIX_SHA256
    assert asset_sha256(rule_gen_prefix()) == RULE_GEN_PREFIX_SHA256


def test_discretize_examples():
    d = discretize_pose(Pose6(0.412, 0.0, 0.0, 0, 0, 0))
    assert d.x == 40
    assert discretize_pose(Pose6(0, 0, 0, 0, 0, 0)) == DiscretePose(0, 0, 0, 0, 0, 0)
    d = discretize_pose(Pose6(0.40, 0.35, 0.20, 180, 0, 90))
    assert (d.x, d.y, d.z) == (40, 35, 20)
    assert (d.roll, d.pitch, d.yaw) == (180, 0, 90)


def test_discretize_ties_away_from_zero_and_wrap():
    assert discretize_pose(Pose6(0.025, 0, 0, 0, 0, 0)).x == 5
    assert discretize_pose(Pose6(0, 0, 0, 0, 0, 352.5)).yaw == 0  # 352.5 -> 360 -> 0
    assert discretize_pose(Pose6(0, 0, 0, 0, 0, 352.4)).yaw == 345


def test_relative_statement_examples():
    ee = Pose6(0.40, 0.35, 0.20, 180, 0, 90)
    obj = ObjectState("bowl", "bowl", Pose6(0.40, 0.47, 0.20, 180, 0, 90))
    texts = {s.dimension: s.text for s in relative_statements(ee, obj)}
    assert texts["y"] == "to the left of the robot arm"

    near = ObjectState("bowl", "bowl", Pose6(0.40, 0.38, 0.10, 180, 0, 90))
    texts = {s.dimension: s.text for s in relative_statements(ee, near)}
    assert texts["y"] == "close to the robot arm along the y-axis"

    held = ObjectState("bottle", "bottle", Pose6(0.4, 0.35, 0.2, 180, 0, 90), held=True)
    assert relative_statements(ee, held) == "The robot arm is holding the bottle."


def test_angular_delta_uses_shortest_arc():
    ee = Pose6(0.4, 0.35, 0.2, 350, 0, 90)
    obj = ObjectState("bowl", "bowl", Pose6(0.4, 0.35, 0.4, 10, 0, 90))
    texts = {s.dimension: s.text for s in relative_statements(ee, obj)}
    # 350 -> 10 is +20 on the shortest arc: rolled more right
    assert texts["roll"] == "rolled more right compared to the robot arm"


def test_all_close_collapses_to_holding():
    ee = Pose6(0.4, 0.35, 0.2, 180, 0, 90)
    obj = ObjectState("bottle_cap", "bottle_cap", Pose6(0.42, 0.33, 0.22, 170, 10, 95))
    assert relative_statements(ee, obj) == "The robot arm is holding the bottle cap."


def test_dropped_statement():
    ee = Pose6(0.4, 0.35, 0.2, 180, 0, 90)
    obj = ObjectState("bottle_cap", "bottle_cap", Pose6(0.2, 0.1, 0.015, 180, 0, 90),
                      dropped=True)
    assert relative_statements(ee, obj) == "has been dropped"


def test_pose_section_matches_golden():
    golden = normalize_lines((DATA / "pose_section_golden.txt").read_text())
    desc = describe_world(golden_pose_world(), WATER_LINE, ("bottle_cap", "bottle", "bowl"))
    assert normalize_lines(render_pose_section(desc)) == golden


def test_example_render_matches_golden():
    golden = normalize_lines((DATA / "example_golden.txt").read_text())
    world = WorldState(
        ee_pose=Pose6(0.50, 0.30, 0.15, 120, 0, 90),
        gripper_aperture=1.0,
        objects=(
            ObjectState("bottle_cap", "bottle_cap", Pose6(0.52, 0.28, 0.16, 145, 20, 95)),
            ObjectState("bottle", "bottle", Pose6(0.52, 0.32, 0.03, 145, 335, 94)),
            ObjectState("bowl", "bowl", Pose6(0.65, 0.42, 0.02, 150, 330, 95)),
        ),
    )
    desc = describe_world(world, WATER_LINE, ("bottle_cap", "bottle", "bowl"))
    rendered = render_example(0, desc, group_number=1, letter="C", action_name="Pitch up")
    assert normalize_lines(rendered) == golden


def test_prompt_bundle_modes():
    world = golden_pose_world()
    lams = assemble_prompt("RULES", world, WATER_LINE, ("bottle_cap", "bottle", "bowl"), "lams")
    static = assemble_prompt("RULES", world, WATER_LINE, ("bottle_cap", "bottle", "bowl"), "static")
    assert "RULES" in lams.text
    assert static.rules_section == ""
    assert lams.text.startswith(mode_switch_prefix())
    assert lams.text.index("RULES") < lams.text.index("### Current Task")


def test_num_state_mode_numeric_deltas():
    world = golden_pose_world()
    bundle = assemble_prompt("", world, WATER_LINE, ("bottle_cap", "bottle", "bowl"), "num_state")
    # bottle is 15 cm forward and 15 cm to the right of the arm
    assert '"x_relation": 15,' in bundle.pose_section
    assert '"y_relation": -15,' in bundle.pose_section
    assert '"pitch_relation": -20,' in bundle.pose_section
    # holding collapse still applies in numeric mode
    assert "The robot arm is holding the bottle cap." in bundle.pose_section


def test_rendering_deterministic():
    world = golden_pose_world()
    a = assemble_prompt("R1", world, WATER_LINE, ("bottle_cap", "bottle", "bowl"), "lams")
    b = assemble_prompt("R1", world, WATER_LINE, ("bottle_cap", "bottle", "bowl"), "lams")
    assert a.text == b.text


pose_strategy = st.builds(
    Pose6,
    st.floats(0, 0.8), st.floats(0, 0.8), st.floats(0, 0.8),
    st.floats(0, 359.9), st.floats(0, 359.9), st.floats(0, 359.9),
)


@settings(max_examples=200, deadline=None)
@given(ee=pose_strategy, obj=pose_strategy, held=st.booleans(), dropped=st.booleans())
def test_vocabulary_closure_fuzz(ee, obj, held, dropped):
    state = ObjectState("bowl", "bowl", obj, held=held, dropped=dropped and not held)
    rel = relative_statements(ee, state)
    if isinstance(rel, str):
        assert rel == "has been dropped" or rel.startswith("The robot arm is holding")
    else:
        assert len(rel) == 6
        for s in rel:
            assert s.text in VOCABULARY


@settings(max_examples=200, deadline=None)
@given(pose=pose_strategy)
def test_discretize_idempotent(pose):
    d = discretize_pose(pose)
    again = discretize_pose(Pose6(d.x / 100, d.y / 100, d.z / 100, d.roll, d.pitch, d.yaw))
    assert again == d
