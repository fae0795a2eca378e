"""Offline replay of recorded sessions under alternative prompting variants.

At every recorded switch point the variant rebuilds its own prompt from the
logged world snapshot plus its own accumulated examples/rules, makes a
parallel call, and counts a simulated manual switch whenever the user's next
driven direction for a group deviates from the variant's predicted mapping.
Simulated corrections feed the variant's stores exactly as live ones would.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..actions import ActionDirection, DirectionGroup, cycle_distance, group_of
from ..events import read_log
from ..gateway import (
    Backend,
    CompletionRequest,
    CompletionResult,
    GatewayError,
    ReplayBackend,
)
from ..grounding import describe_world
from ..learning import LearningStore, ManualSwitchEvent
from ..switching import ModeSwitcher, StrategyKind, SwitchContext, decide_mapping
from ..tasks import build_task
from ..world import WorldState


class IncompleteLog(RuntimeError):
    pass


@dataclass(frozen=True)
class ShadowTrialResult:
    log_path: str
    trial_index: int
    recorded_manual_switches: int
    simulated_manual_switches: int
    switch_points: int


@dataclass(frozen=True)
class _SwitchPoint:
    world: WorldState
    last_executed: dict[DirectionGroup, ActionDirection]
    drives: list[ActionDirection]  # chronological engaged directions until next point


def _segment_log(records: list[dict]) -> tuple[dict, list[_SwitchPoint], int]:
    meta = next((r for r in records if r["kind"] == "meta"), None)
    if meta is None:
        raise IncompleteLog("log has no meta record")
    points: list[_SwitchPoint] = []
    recorded = 0
    drives: list[ActionDirection] = []
    last_exec: dict[DirectionGroup, ActionDirection] = {}
    for record in records:
        if record["kind"] == "auto_switch":
            prov = record["provenance"]
            if prov.get("prompt") is None:
                continue  # non-LLM strategies have no replayable points
            if "world" not in record:
                raise IncompleteLog("switch point lacks a world snapshot")
            points.append(_SwitchPoint(
                world=WorldState.from_dict(record["world"]),
                last_executed=dict(last_exec),
                drives=[],
            ))
            drives = points[-1].drives
            last_exec = {}
        elif record["kind"] == "input":
            for name in record.get("engaged", []):
                direction = ActionDirection(name)
                drives.append(direction)
                last_exec[group_of(direction)] = direction
        elif record["kind"] == "manual_switch":
            recorded += 1
    return meta, points, recorded


def build_replay_backend(log_paths: list[str | Path]) -> ReplayBackend:
    """Answer prompts with the exact completions recorded in the logs."""
    backend = ReplayBackend()
    for path in log_paths:
        for record in read_log(path):
            if record["kind"] == "auto_switch":
                prov = record["provenance"]
                if prov.get("prompt") and prov.get("letter_probs"):
                    backend.record_letter_probs(
                        prov["prompt"],
                        {int(k): v for k, v in prov["letter_probs"].items()})
            elif record["kind"] == "rule_gen" and record.get("response") is not None:
                backend.record(record["prompt"], CompletionResult(text=record["response"]))
    return backend


def shadow_replay(log_paths: list[str | Path], variant: StrategyKind,
                  backend: Backend | None = None) -> list[ShadowTrialResult]:
    """Replay an experiment's logs (in trial order) under a variant strategy.

    With no backend given, responses replay from the logs themselves, which is
    exact for the recorded strategy (self-replay); cross-variant replay needs
    a prompt-matching mock backend.
    """
    if not variant.uses_llm:
        raise ValueError("shadow replay applies to the LLM-driven strategies")
    if backend is None:
        backend = build_replay_backend(log_paths)

    results = []
    store: LearningStore | None = None
    switcher: ModeSwitcher | None = None
    for path in log_paths:
        records = read_log(path)
        meta, points, recorded = _segment_log(records)
        task = build_task(meta["task"])
        if store is None and variant.learns:
            store = LearningStore(meta["task"], seed=meta["rng_seed"])
        if switcher is None:
            switcher = ModeSwitcher(variant, task, backend,
                                    store if variant.learns else None)

        simulated = 0
        for point in points:
            bundle = switcher.build_prompt(point.world)
            try:
                result = backend.complete(CompletionRequest(
                    prompt=bundle.text, max_tokens=128, temperature=0.0,
                    want_logprobs=True, top_alternatives=5))
                mode, _, _ = decide_mapping(
                    variant, result,
                    SwitchContext(point.last_executed, None), switcher.threshold)
            except GatewayError as exc:
                raise IncompleteLog(
                    f"variant call unanswerable at a switch point: {exc}") from exc

            first_driven: dict[DirectionGroup, ActionDirection] = {}
            for direction in point.drives:
                first_driven.setdefault(group_of(direction), direction)

            for group, driven in first_driven.items():
                predicted = mode.slot(group)
                if predicted is driven:
                    continue
                presses = cycle_distance(predicted, driven)
                simulated += presses
                if variant.learns:
                    event = ManualSwitchEvent(
                        tick=point.world.tick, slot=group,
                        old=predicted, new=driven, press_count=presses)
                    desc = describe_world(point.world, task.task_line, task.object_order)
                    store.add_example(event, desc)
                    if variant.synthesizes_rules:
                        store.synthesize_rules(backend)

        results.append(ShadowTrialResult(
            log_path=str(path),
            trial_index=meta["trial_index"],
            recorded_manual_switches=recorded,
            simulated_manual_switches=simulated,
            switch_points=len(points),
        ))
    return results
