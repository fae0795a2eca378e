"""Incremental improvement: correction examples, synthesized rules, stores.

Every finalized manual switch becomes one rendered example; each append
triggers one rule-generation call whose parsed rules extend the task's rule
list. Rules are append-only within a task and reset between tasks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .actions import DISPLAY_NAME, ActionDirection, DirectionGroup, label_of
from .gateway import Backend, CompletionRequest, GatewayError
from .grounding import PoseDescription, render_example, rule_gen_prefix

SETTLE_TICKS = 20  # 2 s at the default tick: presses older than this finalize

RULES_PREAMBLE = (
    "Below are a set of rules derived from previous examples. These rules summarize "
    "the patterns identified between task information, robot arm's state, object "
    "information, and the chosen actions. Your task is to apply these rules to "
    "predict the most likely actions out of the specified groups for the current "
    "situation."
)

EXAMPLES_HEADER = "### Examples:"


@dataclass(frozen=True)
class ManualSwitchEvent:
    tick: int
    slot: DirectionGroup
    old: ActionDirection
    new: ActionDirection
    press_count: int

    def __post_init__(self):
        if self.new is self.old:
            raise ValueError("manual switch must land on a different direction")


@dataclass(frozen=True)
class ExampleRecord:
    index: int
    tick: int
    group_number: int
    letter: str
    action_name: str
    description: PoseDescription
    press_count: int

    def render(self) -> str:
        return render_example(
            self.index, self.description, self.group_number, self.letter, self.action_name
        )

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "tick": self.tick,
            "group_number": self.group_number,
            "letter": self.letter,
            "action_name": self.action_name,
            "description": {
                "task_block": self.description.task_block,
                "robot_block": self.description.robot_block,
                "objects_block": self.description.objects_block,
            },
            "press_count": self.press_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExampleRecord":
        return cls(
            index=d["index"], tick=d["tick"], group_number=d["group_number"],
            letter=d["letter"], action_name=d["action_name"],
            description=PoseDescription(**d["description"]),
            press_count=d["press_count"],
        )


@dataclass(frozen=True)
class Rule:
    text: str
    origin: int  # generation batch id

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("rules must be nonempty")


@dataclass(frozen=True)
class SynthesisOutcome:
    """One rule-generation call: the prompt sent, raw response, parsed rules."""

    prompt: str
    response: str | None
    new_rules: list["Rule"]


_ITEM_START = re.compile(r"^(?:\d+[.)]\s+|[-*]\s+)")


def parse_rules(text: str) -> list[str]:
    """Split a rule-generation completion into top-level items.

    Indented lines stay attached to their item; a column-zero paragraph that is
    not an item marker ends item collection. A completion with no items at all
    counts as a single rule.
    """
    items: list[list[str]] = []
    current: list[str] | None = None
    pending_blanks: list[str] = []
    for line in text.split("\n"):
        m = _ITEM_START.match(line)
        if m:
            current = [line[m.end():]]
            items.append(current)
            pending_blanks = []
        elif current is not None:
            if not line.strip():
                pending_blanks.append(line)
            elif line[0].isspace():
                current.extend(pending_blanks)
                pending_blanks = []
                current.append(line)
            else:
                current = None
                pending_blanks = []
    rules = ["\n".join(lines).rstrip() for lines in items]
    rules = [r for r in rules if r.strip()]
    if not rules and text.strip():
        return [text.strip()]
    return rules


class LearningStore:
    """Per-task example list and rule list with deterministic shuffling."""

    def __init__(self, task_name: str, seed: int = 0):
        self.task_name = task_name
        self.rng = Random(seed)
        self.examples: list[ExampleRecord] = []
        self.rules: list[Rule] = []
        self._batches = 0

    def add_example(self, event: ManualSwitchEvent, description: PoseDescription) -> ExampleRecord:
        label = label_of(event.new)
        record = ExampleRecord(
            index=len(self.examples),
            tick=event.tick,
            group_number=label.group.number,
            letter=label.letter,
            action_name=DISPLAY_NAME[event.new],
            description=description,
            press_count=event.press_count,
        )
        self.examples.append(record)
        return record

    def rule_gen_prompt(self) -> str:
        if not self.examples:
            raise ValueError("rule generation requires at least one example")
        shuffled = list(self.examples)
        self.rng.shuffle(shuffled)
        return rule_gen_prefix() + "\n\n" + "\n\n".join(e.render() for e in shuffled)

    def synthesize_rules(self, backend: Backend) -> "SynthesisOutcome":
        """One rule-generation call over the shuffled examples; appends to R.

        Gateway failures leave R unchanged; the next manual switch retries.
        """
        prompt = self.rule_gen_prompt()
        try:
            result = backend.complete(CompletionRequest(
                prompt=prompt, max_tokens=1024, temperature=0.0, want_logprobs=False))
        except GatewayError:
            return SynthesisOutcome(prompt, None, [])
        batch = self._batches
        self._batches += 1
        new_rules = [Rule(text, batch) for text in parse_rules(result.text)]
        self.rules.extend(new_rules)
        return SynthesisOutcome(prompt, result.text, new_rules)

    def rule_section(self) -> str:
        """Shuffled rules under the guidance preamble; empty when R is empty."""
        if not self.rules:
            return ""
        shuffled = list(self.rules)
        self.rng.shuffle(shuffled)
        rendered = []
        for i, rule in enumerate(shuffled, start=1):
            rendered.append(f"{i}. {rule.text}")
        return RULES_PREAMBLE + "\n\n" + "\n\n".join(rendered)

    def examples_section(self) -> str:
        """Shuffled raw examples, for prompting without rule synthesis."""
        if not self.examples:
            return ""
        shuffled = list(self.examples)
        self.rng.shuffle(shuffled)
        return EXAMPLES_HEADER + "\n\n" + "\n\n".join(e.render() for e in shuffled)

    def to_dict(self) -> dict:
        return {
            "task": self.task_name,
            "examples": [e.to_dict() for e in self.examples],
            "rules": [{"text": r.text, "origin": r.origin} for r in self.rules],
            "batches": self._batches,
        }

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path, seed: int = 0) -> "LearningStore":
        d = json.loads(Path(path).read_text())
        store = cls(d["task"], seed=seed)
        store.examples = [ExampleRecord.from_dict(e) for e in d["examples"]]
        store.rules = [Rule(r["text"], r["origin"]) for r in d["rules"]]
        store._batches = d["batches"]
        return store


def reset_for_task(store: LearningStore | None, task_name: str, seed: int,
                   archive_dir: str | Path | None = None) -> LearningStore:
    """Archive the previous store (if any) and start fresh for a task."""
    if store is not None and archive_dir is not None:
        archive = Path(archive_dir)
        archive.mkdir(parents=True, exist_ok=True)
        n = len(list(archive.glob(f"{store.task_name}_*.json")))
        store.save(archive / f"{store.task_name}_{n:03d}.json")
    return LearningStore(task_name, seed=seed)


@dataclass
class _PendingPresses:
    slot: DirectionGroup
    first_old: ActionDirection
    last_new: ActionDirection
    press_count: int
    last_tick: int
    description: PoseDescription


class ManualSwitchDebouncer:
    """Coalesces consecutive presses on one slot into a single settled event.

    A burst finalizes on the next nonzero joystick input, on a press landing on
    a different slot, or after the settle window elapses. A burst that cycles
    back to its starting direction finalizes to nothing.
    """

    def __init__(self, settle_ticks: int = SETTLE_TICKS):
        self.settle_ticks = settle_ticks
        self._pending: _PendingPresses | None = None
        self.last_finalized_description: PoseDescription | None = None

    def press(self, tick: int, slot: DirectionGroup, old: ActionDirection,
              new: ActionDirection, description: PoseDescription) -> ManualSwitchEvent | None:
        finalized = None
        if self._pending is not None and self._pending.slot is not slot:
            finalized = self._finalize()
        if self._pending is None:
            self._pending = _PendingPresses(slot, old, new, 1, tick, description)
        else:
            self._pending.last_new = new
            self._pending.press_count += 1
            self._pending.last_tick = tick
            self._pending.description = description
        return finalized

    def on_input(self, tick: int, is_zero: bool) -> ManualSwitchEvent | None:
        if not is_zero and self._pending is not None:
            return self._finalize()
        return None

    def on_tick(self, tick: int) -> ManualSwitchEvent | None:
        if self._pending is not None and tick - self._pending.last_tick >= self.settle_ticks:
            return self._finalize()
        return None

    def flush(self) -> ManualSwitchEvent | None:
        if self._pending is not None:
            return self._finalize()
        return None

    def _finalize(self) -> ManualSwitchEvent | None:
        pending, self._pending = self._pending, None
        self.last_finalized_description = pending.description
        if pending.last_new is pending.first_old:
            return None
        return ManualSwitchEvent(
            tick=pending.last_tick,
            slot=pending.slot,
            old=pending.first_old,
            new=pending.last_new,
            press_count=pending.press_count,
        )
