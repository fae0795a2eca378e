"""Trial runner: scripted user + simulator + switching strategy + learning.

One experiment is three trials of a task with different layouts; strategies
that learn keep their example/rule stores across the experiment's trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from ..actions import (
    ActionDirection,
    DirectionGroup,
    UserAction,
    cycle_next,
    engaged_directions,
    group_of,
)
from ..config import SimConfig
from ..events import SCHEMA_VERSION, EventLog
from ..gateway import (
    Backend,
    OracleBackend,
    ScriptedMockBackend,
    StagedGripperBackend,
)
from ..grounding import describe_world
from ..learning import LearningStore, ManualSwitchDebouncer, ManualSwitchEvent
from ..switching import ModeSwitcher, ProvenanceRecord, StrategyKind, SwitchContext
from ..tasks import TaskProgress, build_task
from ..world import PauseDetector, WorldState, apply_mode_step
from .scripted_user import Done, Drive, ManualSwitch, Pause, ScriptedUser


@dataclass(frozen=True)
class TrialConfig:
    task: str
    strategy: StrategyKind
    layout_seed: int
    trial_index: int = 1
    rng_seed: int = 0
    backend_kind: str = "oracle"          # oracle | staged | mock
    mock_script: str = ""
    patience: int = 1
    tick_budget: int = 20000
    log_path: str | None = None


@dataclass
class TrialResult:
    task: str
    strategy: str
    trial_index: int
    layout_seed: int
    manual_switches: int
    per_slot_switches: dict[str, int]
    false_gripper_mappings: int
    rotation_accuracy: dict[str, tuple[int, int]]
    completed: bool
    ticks: int
    stages_reached: int
    log_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "strategy": self.strategy,
            "trial_index": self.trial_index,
            "layout_seed": self.layout_seed,
            "manual_switches": self.manual_switches,
            "per_slot_switches": self.per_slot_switches,
            "false_gripper_mappings": self.false_gripper_mappings,
            "rotation_accuracy": {k: list(v) for k, v in self.rotation_accuracy.items()},
            "completed": self.completed,
            "ticks": self.ticks,
            "stages_reached": self.stages_reached,
            "log_path": self.log_path,
        }


class _NeedBox:
    """Late-bound hook giving oracle-style backends the user's current need."""

    def __init__(self):
        self.user: ScriptedUser | None = None
        self.world: WorldState | None = None

    def __call__(self) -> dict[DirectionGroup, ActionDirection]:
        if self.user is None or self.world is None:
            return {}
        need = self.user.current_need(self.world)
        return {group_of(need): need} if need else {}


def make_backend(config: TrialConfig, need_box: _NeedBox) -> Backend:
    if config.backend_kind == "oracle":
        return OracleBackend(need_box)
    if config.backend_kind == "staged":
        return StagedGripperBackend(need_box)
    if config.backend_kind == "mock":
        return ScriptedMockBackend.from_file(config.mock_script)
    raise ValueError(f"unknown backend kind {config.backend_kind!r}")


def run_trial(config: TrialConfig, store: LearningStore | None = None,
              backend: Backend | None = None,
              sim: SimConfig | None = None) -> TrialResult:
    sim = sim or SimConfig()
    task = build_task(config.task, sim)
    world = task.make_layout(config.layout_seed)
    user = ScriptedUser(task.make_plan(world), sim.velocities, patience=config.patience)

    need_box = _NeedBox()
    need_box.user = user
    need_box.world = world
    if backend is None:
        backend = make_backend(config, need_box)

    if config.strategy.learns and store is None:
        store = LearningStore(config.task, seed=config.rng_seed)
    switcher = ModeSwitcher(config.strategy, task,
                            backend if config.strategy.uses_llm else None,
                            store if config.strategy.learns else None)

    log = EventLog(config.log_path)
    log.append("meta", schema=SCHEMA_VERSION, task=config.task,
               strategy=config.strategy.value, layout_seed=config.layout_seed,
               trial_index=config.trial_index, rng_seed=config.rng_seed,
               backend=config.backend_kind, patience=config.patience)
    log.append("layout", tick=0, world=world.to_dict())

    tracker = TaskProgress(task, sim)
    detector = PauseDetector(sim.clock)
    debouncer = ManualSwitchDebouncer()
    last_executed: dict[DirectionGroup, ActionDirection] = {}
    manual_count = 0
    per_slot = {g.value: 0 for g in DirectionGroup}
    last_engaged: tuple[str, ...] | None = None

    def log_switch(prov: ProvenanceRecord, snapshot: WorldState,
                   ctx: SwitchContext | None):
        log.append(
            "auto_switch", tick=snapshot.tick, provenance=prov.to_dict(),
            world=snapshot.to_dict(),
            last_executed={g.value: d.value for g, d in (ctx.last_executed if ctx else {}).items()},
        )

    def handle_settle(event: ManualSwitchEvent | None):
        nonlocal store
        if event is None:
            return
        log.append("manual_settle", tick=event.tick, slot=event.slot.value,
                   old=event.old.value, new=event.new.value,
                   press_count=event.press_count)
        if config.strategy.learns:
            desc = debouncer.last_finalized_description or \
                describe_world(world, task.task_line, task.object_order)
            record = store.add_example(event, desc)
            log.append("example", tick=event.tick, index=record.index,
                       group_number=record.group_number, letter=record.letter,
                       action_name=record.action_name,
                       press_count=record.press_count)
            if config.strategy.synthesizes_rules:
                outcome = store.synthesize_rules(backend)
                log.append("rule_gen", tick=event.tick, prompt=outcome.prompt,
                           response=outcome.response,
                           rules=[r.text for r in outcome.new_rules],
                           rule_count_after=len(store.rules))

    mode, prov = switcher.initial_switch(world)
    log_switch(prov, world, None)

    completed = False
    while world.tick < config.tick_budget:
        idx_before = tracker.index
        decision = user.decide(world, mode)
        if isinstance(decision, Done):
            completed = tracker.completed
            break

        a_u = UserAction(0.0, 0.0)
        if isinstance(decision, Drive):
            a_u = decision.action
            handle_settle(debouncer.on_input(world.tick, is_zero=False))
            for d in engaged_directions(mode, a_u):
                last_executed[group_of(d)] = d
            engaged = tuple(d.value for d in engaged_directions(mode, a_u))
            if engaged != last_engaged:
                log.append("input", tick=world.tick, lateral=a_u.lateral,
                           longitudinal=a_u.longitudinal, engaged=list(engaged))
                last_engaged = engaged
        elif isinstance(decision, ManualSwitch):
            if config.strategy is StrategyKind.GROUPED_MAPPING:
                # Group integrity: one X press cycles all four slots and
                # counts as exactly one manual switch.
                mode, prov = switcher.grouped_cycle()
                manual_count += 1
                log.append("grouped_cycle", tick=world.tick,
                           group_index=switcher.group_index,
                           mapping=mode.to_dict(), count_after=manual_count)
            else:
                old = mode.slot(decision.slot)
                new = cycle_next(old)
                mode = mode.with_slot(decision.slot, new)
                manual_count += 1
                per_slot[decision.slot.value] += 1
                log.append("manual_switch", tick=world.tick, slot=decision.slot.value,
                           old=old.value, new=new.value, count_after=manual_count)
                desc = describe_world(world, task.task_line, task.object_order)
                finalized = debouncer.press(world.tick, decision.slot, old, new, desc)
                handle_settle(finalized)
            last_engaged = None
        elif isinstance(decision, Pause) and last_engaged != ():
            log.append("pause", tick=world.tick)
            last_engaged = ()

        world, events = apply_mode_step(world, mode, a_u, sim)
        need_box.world = world
        handle_settle(debouncer.on_tick(world.tick))

        if detector.update(a_u):
            ctx = SwitchContext(dict(last_executed), mode)
            out = switcher.on_pause(world, ctx)
            if out is not None:
                mode, prov = out
                log_switch(prov, world, ctx)
                last_executed.clear()
            user.note_auto_switch(world)

        phase_out = switcher.on_step_events(world, events)
        if phase_out is not None:
            mode, prov = phase_out
            log_switch(prov, world, None)

        idx, done = tracker.update(world)
        if idx != idx_before:
            log.append("stage", tick=world.tick, index=idx,
                       name=task.stages[idx - 1].name if idx > 0 else "")
        if done:
            completed = True
            break

    handle_settle(debouncer.flush())
    log.append("end", tick=world.tick, completed=completed,
               manual_switches=manual_count, stages_reached=tracker.index)

    from .metrics import count_false_gripper_mappings, rotation_accuracy
    records = log.records
    result = TrialResult(
        task=config.task,
        strategy=config.strategy.value,
        trial_index=config.trial_index,
        layout_seed=config.layout_seed,
        manual_switches=manual_count,
        per_slot_switches=per_slot,
        false_gripper_mappings=count_false_gripper_mappings(records),
        rotation_accuracy=rotation_accuracy(records),
        completed=completed,
        ticks=world.tick,
        stages_reached=tracker.index,
        log_path=config.log_path,
    )
    log.close()
    return result


def run_experiment(task: str, strategy: StrategyKind, seed: int,
                   trials: int = 3, backend_kind: str = "oracle",
                   mock_script: str = "", patience: int = 1,
                   tick_budget: int = 20000,
                   log_dir: str | Path | None = None,
                   sim: SimConfig | None = None) -> list[TrialResult]:
    """Run an N-trial experiment; learning strategies share stores across trials."""
    store = LearningStore(task, seed=seed) if strategy.learns else None
    results = []
    for trial_index in range(1, trials + 1):
        log_path = None
        if log_dir is not None:
            log_path = str(Path(log_dir) /
                           f"{task}_{strategy.value}_seed{seed}_trial{trial_index}.jsonl")
        config = TrialConfig(
            task=task, strategy=strategy, layout_seed=seed * 10 + trial_index,
            trial_index=trial_index, rng_seed=seed, backend_kind=backend_kind,
            mock_script=mock_script, patience=patience, tick_budget=tick_budget,
            log_path=log_path,
        )
        results.append(run_trial(config, store=store, sim=sim))
    return results
