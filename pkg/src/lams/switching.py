"""Mode-switching strategies: distribution selection, baselines, ablations.

The LLM-driven strategies differ only in how the prompt is assembled (rules,
raw examples, numeric state, none) and how the completion is read (probability
distributions with the second-best fallback, or the literally written letter).
The non-LLM baselines are the cycling grouped mapping and the kinematically
triggered heuristic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .actions import ActionDirection, DirectionGroup, ModeMapping
from .gateway import (
    Backend,
    CompletionRequest,
    GatewayError,
    GroupDistribution,
    extract_group_distributions,
    parse_answer_letters,
)
from .grounding import assemble_prompt
from .learning import LearningStore
from .tasks import TaskSpec
from .world import StepEvents, WorldState

SECOND_BEST_THRESHOLD = 0.2  # fallback engages strictly above this probability


class StrategyKind(Enum):
    LAMS = "lams"
    STATIC_LLM = "static_llm"
    TOP_ACTION = "top_action"
    NUM_STATE = "num_state"
    DIRECT_EXAMPLES = "direct_examples"
    GROUPED_MAPPING = "grouped_mapping"
    HEURISTIC = "heuristic"

    @property
    def uses_llm(self) -> bool:
        return self in _LLM_STRATEGIES

    @property
    def learns(self) -> bool:
        """Whether user corrections feed back into this strategy's prompts."""
        return self in (
            StrategyKind.LAMS, StrategyKind.TOP_ACTION,
            StrategyKind.NUM_STATE, StrategyKind.DIRECT_EXAMPLES,
        )

    @property
    def synthesizes_rules(self) -> bool:
        """Direct-examples prompting skips rule generation and embeds raw examples."""
        return self.learns and self is not StrategyKind.DIRECT_EXAMPLES

    @property
    def prompt_mode(self) -> str:
        return {
            StrategyKind.LAMS: "lams",
            StrategyKind.TOP_ACTION: "lams",
            StrategyKind.STATIC_LLM: "static",
            StrategyKind.NUM_STATE: "num_state",
            StrategyKind.DIRECT_EXAMPLES: "direct_examples",
        }[self]


_LLM_STRATEGIES = (
    StrategyKind.LAMS, StrategyKind.STATIC_LLM, StrategyKind.TOP_ACTION,
    StrategyKind.NUM_STATE, StrategyKind.DIRECT_EXAMPLES,
)


class EmptyDistribution(ValueError):
    pass


class WrongStrategy(RuntimeError):
    pass


@dataclass
class SwitchContext:
    """What the switcher knows about recent drives when a call is made."""

    last_executed: dict[DirectionGroup, ActionDirection] = field(default_factory=dict)
    current_mode: ModeMapping | None = None
    threshold: float = SECOND_BEST_THRESHOLD


def select_direction(dist: GroupDistribution, ctx: SwitchContext) -> ActionDirection:
    """Argmax, unless it was just executed and the runner-up clears the threshold."""
    ranked = dist.ranked()
    if not ranked:
        raise EmptyDistribution(f"no probabilities for group {dist.group}")
    best = ranked[0][0]
    if ctx.last_executed.get(dist.group) is best and len(ranked) > 1:
        second, second_prob = ranked[1]
        if second_prob > ctx.threshold:
            return second
    return best


@dataclass(frozen=True)
class ProvenanceRecord:
    """Everything needed to audit or replay one mode-switch decision."""

    strategy: str
    trigger: str                     # task_start | pause | phase | cycle
    prompt_text: str | None
    completion_text: str | None
    letter_probs: dict[int, dict[str, float]] | None
    mapping_before: dict
    mapping_after: dict
    changed_slots: tuple[str, ...]
    fallback_slots: tuple[str, ...] = ()
    degraded: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "trigger": self.trigger,
            "prompt": self.prompt_text,
            "completion": self.completion_text,
            "letter_probs": self.letter_probs,
            "mapping_before": self.mapping_before,
            "mapping_after": self.mapping_after,
            "changed_slots": list(self.changed_slots),
            "fallback_slots": list(self.fallback_slots),
            "degraded": self.degraded,
            "error": self.error,
        }


def _changed_slots(before: ModeMapping | None, after: ModeMapping) -> tuple[str, ...]:
    if before is None:
        return tuple(g.value for g in DirectionGroup)
    return tuple(
        g.value for g in DirectionGroup if before.slot(g) is not after.slot(g)
    )


GROUPED_TABLE: dict[int, ModeMapping] = {
    1: ModeMapping(ActionDirection.MOVE_FORWARD, ActionDirection.MOVE_BACKWARD,
                   ActionDirection.MOVE_LEFT, ActionDirection.MOVE_RIGHT),
    2: ModeMapping(ActionDirection.MOVE_UP, ActionDirection.MOVE_DOWN,
                   ActionDirection.ROLL_LEFT, ActionDirection.ROLL_RIGHT),
    3: ModeMapping(ActionDirection.PITCH_UP, ActionDirection.PITCH_DOWN,
                   ActionDirection.YAW_LEFT, ActionDirection.YAW_RIGHT),
    4: ModeMapping(ActionDirection.OPEN_GRIPPER, ActionDirection.CLOSE_GRIPPER,
                   None, None),
}


@dataclass(frozen=True)
class HeuristicPhase:
    trigger: dict
    mapping: ModeMapping


def load_heuristic_phases(task_name: str) -> tuple[HeuristicPhase, ...]:
    raw = json.loads(
        resources.files("lams.assets").joinpath(f"heuristic_{task_name}.json").read_text()
    )
    phases = []
    for entry in raw:
        phases.append(HeuristicPhase(
            trigger=entry["trigger"],
            mapping=ModeMapping.from_dict(entry["mapping"]),
        ))
    if not phases or phases[0].trigger.get("kind") != "always":
        raise ValueError("heuristic phase 0 must trigger unconditionally")
    return tuple(phases)


def _trigger_fires(trigger: dict, world: WorldState, events: StepEvents) -> bool:
    kind = trigger["kind"]
    if kind == "always":
        return True
    if kind == "grasped":
        return events.grasped == trigger["object"]
    if kind == "released":
        return events.released == trigger["object"]
    if kind == "lifted":
        obj = world.object(trigger["object"])
        return obj.lift_peak - obj.initial_pose.z >= trigger["height"]
    raise ValueError(f"unknown heuristic trigger kind {kind!r}")


class ModeSwitcher:
    """Per-session strategy state machine producing mode mappings."""

    def __init__(self, kind: StrategyKind, task: TaskSpec, backend: Backend | None,
                 store: LearningStore | None,
                 threshold: float = SECOND_BEST_THRESHOLD):
        self.kind = kind
        self.task = task
        self.backend = backend
        self.store = store
        self.threshold = threshold
        self.group_index = 1
        self.phase_index = 0
        self.phases = load_heuristic_phases(task.name) if kind is StrategyKind.HEURISTIC else ()
        if kind.uses_llm and backend is None:
            raise ValueError(f"{kind} requires a backend")
        if kind.learns and store is None:
            raise ValueError(f"{kind} requires a learning store")

    # -- switch triggers ------------------------------------------------------

    def initial_switch(self, world: WorldState) -> tuple[ModeMapping, ProvenanceRecord]:
        if self.kind is StrategyKind.GROUPED_MAPPING:
            self.group_index = 1
            mode = GROUPED_TABLE[1]
            return mode, ProvenanceRecord(
                self.kind.value, "task_start", None, None, None,
                {}, mode.to_dict(), _changed_slots(None, mode))
        if self.kind is StrategyKind.HEURISTIC:
            self.phase_index = 0
            mode = self.phases[0].mapping
            return mode, ProvenanceRecord(
                self.kind.value, "task_start", None, None, None,
                {}, mode.to_dict(), _changed_slots(None, mode))
        return self._llm_switch(world, SwitchContext(threshold=self.threshold), "task_start")

    def on_pause(self, world: WorldState, ctx: SwitchContext) -> tuple[ModeMapping, ProvenanceRecord] | None:
        """A pause requests a switch; only the LLM strategies answer it."""
        if not self.kind.uses_llm:
            return None
        return self._llm_switch(world, ctx, "pause")

    def on_step_events(self, world: WorldState, events: StepEvents,
                       ) -> tuple[ModeMapping, ProvenanceRecord] | None:
        """Heuristic phase transitions fire on kinematic events, monotonically."""
        if self.kind is not StrategyKind.HEURISTIC:
            return None
        if self.phase_index + 1 >= len(self.phases):
            return None
        nxt = self.phases[self.phase_index + 1]
        if not _trigger_fires(nxt.trigger, world, events):
            return None
        self.phase_index += 1
        before = self.phases[self.phase_index - 1].mapping
        return nxt.mapping, ProvenanceRecord(
            self.kind.value, "phase", None, None, None,
            before.to_dict(), nxt.mapping.to_dict(),
            _changed_slots(before, nxt.mapping))

    def grouped_cycle(self) -> tuple[ModeMapping, ProvenanceRecord]:
        if self.kind is not StrategyKind.GROUPED_MAPPING:
            raise WrongStrategy("grouped cycling only applies to the grouped-mapping strategy")
        before = GROUPED_TABLE[self.group_index]
        self.group_index = self.group_index % 4 + 1
        mode = GROUPED_TABLE[self.group_index]
        return mode, ProvenanceRecord(
            self.kind.value, "cycle", None, None, None,
            before.to_dict(), mode.to_dict(), _changed_slots(before, mode))

    # -- LLM path --------------------------------------------------------------

    def build_prompt(self, world: WorldState):
        sections = ""
        if self.kind is StrategyKind.DIRECT_EXAMPLES:
            sections = self.store.examples_section()
        elif self.kind in (StrategyKind.LAMS, StrategyKind.TOP_ACTION, StrategyKind.NUM_STATE):
            sections = self.store.rule_section()
        return assemble_prompt(
            sections, world, self.task.task_line, self.task.object_order,
            mode=self.kind.prompt_mode,
        )

    def _llm_switch(self, world: WorldState, ctx: SwitchContext,
                    trigger: str) -> tuple[ModeMapping, ProvenanceRecord]:
        bundle = self.build_prompt(world)
        before = ctx.current_mode
        try:
            result = self.backend.complete(CompletionRequest(
                prompt=bundle.text, max_tokens=128, temperature=0.0,
                want_logprobs=True, top_alternatives=5))
            mode, letter_probs, fallback_slots = decide_mapping(
                self.kind, result, ctx, self.threshold)
        except GatewayError as exc:
            # Keep the current mapping; the task stays completable manually.
            mode = before if before is not None else GROUPED_TABLE[1]
            return mode, ProvenanceRecord(
                self.kind.value, trigger, bundle.text, None, None,
                before.to_dict() if before else {}, mode.to_dict(), (),
                degraded=True, error=f"{type(exc).__name__}: {exc}")
        return mode, ProvenanceRecord(
            self.kind.value, trigger, bundle.text, result.text, letter_probs,
            before.to_dict() if before else {}, mode.to_dict(),
            _changed_slots(before, mode), fallback_slots=fallback_slots)


def decide_mapping(kind: StrategyKind, result, ctx: SwitchContext,
                   threshold: float) -> tuple[ModeMapping, dict, tuple[str, ...]]:
    """Turn a completion into a mapping per the strategy's output processing."""
    letter_probs: dict[int, dict[str, float]] = {}
    fallback_slots: list[str] = []
    if kind is StrategyKind.TOP_ACTION:
        # Always take the letter written in the response text.
        selections = parse_answer_letters(result)
        try:
            dists = extract_group_distributions(result)
            letter_probs = {g.number: d.to_letter_probs() for g, d in dists.items()}
        except GatewayError:
            letter_probs = {}
    else:
        dists = extract_group_distributions(result)
        letter_probs = {g.number: d.to_letter_probs() for g, d in dists.items()}
        selections = {}
        for group, dist in dists.items():
            chosen = select_direction(
                dist, SwitchContext(ctx.last_executed, ctx.current_mode, threshold))
            selections[group] = chosen
            if chosen is not dist.ranked()[0][0]:
                fallback_slots.append(group.value)
    mode = ModeMapping(
        selections[DirectionGroup.UP], selections[DirectionGroup.DOWN],
        selections[DirectionGroup.LEFT], selections[DirectionGroup.RIGHT])
    return mode, letter_probs, tuple(fallback_slots)
