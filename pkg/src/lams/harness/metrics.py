"""Metrics over event logs: switch counts, false gripper mappings, rotation accuracy."""

from __future__ import annotations

import csv
import io
from pathlib import Path

GRIPPER_DIRECTIONS = ("open_gripper", "close_gripper")
ROTATION_AXES = {
    "pitch": ("pitch_up", "pitch_down"),
    "yaw": ("yaw_left", "yaw_right"),
    "roll": ("roll_left", "roll_right"),
}
_AXIS_OF = {d: axis for axis, dirs in ROTATION_AXES.items() for d in dirs}


def count_manual_switches(records: list[dict]) -> int:
    """Press-granularity count: one per D-pad press or grouped-cycle press."""
    return sum(1 for r in records if r["kind"] in ("manual_switch", "grouped_cycle"))


def _assignment_windows(records: list[dict], slots: tuple[str, ...]):
    """Yield (slot, direction, following records) per auto-switch assignment.

    A window closes at the next event that touches the slot: a manual press on
    it or the next automatic switch.
    """
    for i, record in enumerate(records):
        if record["kind"] != "auto_switch":
            continue
        mapping = record["provenance"]["mapping_after"]
        for slot in slots:
            direction = mapping.get(slot)
            if direction is None:
                continue
            window = []
            for later in records[i + 1:]:
                if later["kind"] == "auto_switch" or later["kind"] == "grouped_cycle":
                    break
                if later["kind"] == "manual_switch" and later["slot"] == slot:
                    window.append(later)
                    break
                window.append(later)
            yield slot, direction, window


def count_false_gripper_mappings(records: list[dict]) -> int:
    """Automatic gripper assignments the user switched away before driving them."""
    count = 0
    for slot, direction, window in _assignment_windows(records, ("up", "down")):
        if direction not in GRIPPER_DIRECTIONS:
            continue
        for event in window:
            if event["kind"] == "input" and direction in event.get("engaged", []):
                break  # driven: the assignment was wanted
            if event["kind"] == "manual_switch" and event["slot"] == slot:
                count += 1
                break
    return count


def rotation_accuracy(records: list[dict]) -> dict[str, tuple[int, int]]:
    """Per-axis (correct, required) tallies for rotation predictions.

    correct: automatically offered rotations the user then drove. required
    additionally counts settled manual switches onto that rotation.
    """
    tallies = {axis: [0, 0] for axis in ROTATION_AXES}
    for slot, direction, window in _assignment_windows(
            records, ("up", "down", "left", "right")):
        axis = _AXIS_OF.get(direction)
        if axis is None:
            continue
        for event in window:
            if event["kind"] == "input" and direction in event.get("engaged", []):
                tallies[axis][0] += 1
                tallies[axis][1] += 1
                break
            if event["kind"] == "manual_switch" and event["slot"] == slot:
                break
    for record in records:
        if record["kind"] != "manual_settle":
            continue
        axis = _AXIS_OF.get(record["new"])
        if axis is not None:
            tallies[axis][1] += 1
    return {axis: (c, r) for axis, (c, r) in tallies.items()}


RESULT_COLUMNS = (
    "task", "strategy", "trial_index", "layout_seed", "manual_switches",
    "false_gripper_mappings", "completed", "ticks", "stages_reached",
    "pitch_correct", "pitch_required", "yaw_correct", "yaw_required",
    "roll_correct", "roll_required",
)


def result_rows(results: list) -> list[dict]:
    rows = []
    for r in results:
        d = dict(r.to_dict()) if hasattr(r, "to_dict") else dict(r)
        rot = d.pop("rotation_accuracy")
        d.pop("per_slot_switches", None)
        d.pop("log_path", None)
        for axis in ROTATION_AXES:
            d[f"{axis}_correct"], d[f"{axis}_required"] = rot[axis]
        rows.append({k: d[k] for k in RESULT_COLUMNS})
    return rows


def write_csv(results: list, path: str | Path) -> str:
    rows = result_rows(results)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())
    return buf.getvalue()


def markdown_table(results: list) -> str:
    """Trial-indexed manual-switch table, one row per (task, strategy)."""
    rows = result_rows(results)
    trials = sorted({r["trial_index"] for r in rows})
    keys = sorted({(r["task"], r["strategy"]) for r in rows})
    lines = ["| task | strategy | " + " | ".join(f"trial {t}" for t in trials) + " |",
             "|---|---|" + "---|" * len(trials)]
    for task, strategy in keys:
        cells = []
        for t in trials:
            vals = [r["manual_switches"] for r in rows
                    if r["task"] == task and r["strategy"] == strategy
                    and r["trial_index"] == t]
            cells.append(f"{sum(vals) / len(vals):.1f}" if vals else "-")
        lines.append(f"| {task} | {strategy} | " + " | ".join(cells) + " |")
    return "\n".join(lines)
