"""Real-time session host: tick loop, wall-clock pause detection, streaming.

Each session owns a single asyncio tick task that applies the freshest
joystick sample, steps the world, fires pause-triggered switches, and pushes
state frames to subscribers. LLM calls run off-loop; a manual switch landing
while a call is pending wins over that slot's automatic result.
"""

from __future__ import annotations

import asyncio
import time
import uuid
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..actions import (
    DISPLAY_NAME,
    ActionDirection,
    DirectionGroup,
    ModeMapping,
    UserAction,
    cycle_next,
    engaged_directions,
    group_of,
)
from ..config import SessionClock, SimConfig
from ..events import SCHEMA_VERSION, EventLog
from ..gateway import Backend, BackendConfig, HttpBackend, ScriptedMockBackend
from ..grounding import describe_world
from ..learning import LearningStore, ManualSwitchDebouncer, ManualSwitchEvent
from ..switching import (
    ModeSwitcher,
    ProvenanceRecord,
    StrategyKind,
    SwitchContext,
    WrongStrategy,
)
from ..tasks import TaskProgress, build_task
from ..world import PauseDetector, WorldState, apply_mode_step

INPUT_STALENESS_S = 0.5


class SessionClosed(RuntimeError):
    pass


class UnknownSession(KeyError):
    pass


@dataclass
class SessionRequest:
    task: str
    strategy: str
    layout_seed: int = 1
    backend: str = "mock"              # mock | real
    mock_script: str = ""              # empty -> bundled demo script
    backend_delay_s: float = 0.0
    tick_duration: float = 0.1
    pause_threshold: float = 1.5
    endpoint: str = ""
    model: str = ""


def _make_backend(request: SessionRequest) -> Backend:
    if request.backend == "real":
        return HttpBackend(BackendConfig(
            backend="real", endpoint=request.endpoint, model=request.model))
    if request.mock_script:
        backend = ScriptedMockBackend.from_file(request.mock_script)
    else:
        with resources.as_file(
                resources.files("lams.assets") / "mock_script_demo.json") as path:
            backend = ScriptedMockBackend.from_file(path)
    backend.delay_s = request.backend_delay_s
    return backend


class Session:
    def __init__(self, request: SessionRequest, store: LearningStore,
                 log_path: Path | None, on_store_mutation=None):
        self.id = uuid.uuid4().hex[:12]
        self.request = request
        self.strategy = StrategyKind(request.strategy)
        self.sim = SimConfig(clock=SessionClock(request.tick_duration,
                                                request.pause_threshold))
        self.task = build_task(request.task, self.sim)
        self.world = self.task.make_layout(request.layout_seed)
        self.store = store
        self.backend = _make_backend(request) if self.strategy.uses_llm else None
        self.switcher = ModeSwitcher(
            self.strategy, self.task,
            self.backend, store if self.strategy.learns else None)
        self.tracker = TaskProgress(self.task, self.sim)
        self.detector = PauseDetector(self.sim.clock)
        self.debouncer = ManualSwitchDebouncer()
        self.on_store_mutation = on_store_mutation
        self.log = EventLog(log_path)

        self.mode, prov = self.switcher.initial_switch(self.world)
        self.manual_count = 0
        self.last_executed: dict[DirectionGroup, ActionDirection] = {}
        self.pending_llm = False
        self.manual_overrides: set[DirectionGroup] = set()
        self.degraded = False
        self.closed = False
        self.seq = 0
        self.changed_markers: dict[str, str] = {s: "auto" for s in prov.changed_slots}
        self._latest_input: tuple[UserAction, float] = (UserAction(0, 0), 0.0)
        self._subscribers: list[asyncio.Queue] = []
        self._rule_lock = asyncio.Lock()
        self._task: asyncio.Task | None = None

        self.log.append("meta", schema=SCHEMA_VERSION, session=self.id,
                        task=request.task, strategy=request.strategy,
                        layout_seed=request.layout_seed,
                        tick_duration=request.tick_duration,
                        pause_threshold=request.pause_threshold)
        self.log.append("layout", tick=0, world=self.world.to_dict())
        self._log_switch(prov)

    # -- command surface -------------------------------------------------------

    def submit_input(self, lateral: float, longitudinal: float):
        self._ensure_open()
        self._latest_input = (UserAction(lateral, longitudinal), time.monotonic())

    def submit_manual_switch(self, slot_name: str):
        self._ensure_open()
        if self.strategy is StrategyKind.GROUPED_MAPPING:
            raise WrongStrategy("grouped-mapping sessions switch with the cycle button")
        slot = DirectionGroup(slot_name)
        old = self.mode.slot(slot)
        new = cycle_next(old)
        self.mode = self.mode.with_slot(slot, new)
        self.manual_count += 1
        self.changed_markers[slot.value] = "manual"
        if self.pending_llm:
            self.manual_overrides.add(slot)
        self.log.append("manual_switch", tick=self.world.tick, slot=slot.value,
                        old=old.value, new=new.value, count_after=self.manual_count)
        if self.strategy.learns:
            desc = describe_world(self.world, self.task.task_line, self.task.object_order)
            finalized = self.debouncer.press(self.world.tick, slot, old, new, desc)
            self._handle_settle(finalized, desc_hint=None)

    def submit_grouped_cycle(self):
        self._ensure_open()
        self.mode, prov = self.switcher.grouped_cycle()  # raises WrongStrategy
        self.manual_count += 1
        for slot in prov.changed_slots:
            self.changed_markers[slot] = "manual"
        self.log.append("grouped_cycle", tick=self.world.tick,
                        group_index=self.switcher.group_index,
                        mapping=self.mode.to_dict(), count_after=self.manual_count)

    def learning_view(self) -> dict:
        if not self.strategy.learns:
            return {"examples": [], "rules": []}
        return {
            "examples": [e.render() for e in self.store.examples],
            "rules": [r.text for r in self.store.rules],
        }

    def end(self):
        if self.closed:
            return
        self.closed = True
        if self._task:
            self._task.cancel()
        settle = self.debouncer.flush()
        if settle is not None:
            self.log.append("manual_settle", tick=settle.tick, slot=settle.slot.value,
                            old=settle.old.value, new=settle.new.value,
                            press_count=settle.press_count)
            if self.strategy.learns:
                desc = self.debouncer.last_finalized_description or describe_world(
                    self.world, self.task.task_line, self.task.object_order)
                record = self.store.add_example(settle, desc)
                self.log.append("example", tick=settle.tick, index=record.index,
                                group_number=record.group_number, letter=record.letter,
                                action_name=record.action_name,
                                press_count=record.press_count)
                if self.strategy.synthesizes_rules:
                    outcome = self.store.synthesize_rules(self.backend)
                    self.log.append("rule_gen", tick=self.world.tick,
                                    prompt=outcome.prompt, response=outcome.response,
                                    rules=[r.text for r in outcome.new_rules],
                                    rule_count_after=len(self.store.rules))
                if self.on_store_mutation:
                    self.on_store_mutation()
        self.log.append("end", tick=self.world.tick,
                        completed=self.tracker.completed,
                        manual_switches=self.manual_count,
                        stages_reached=self.tracker.index)
        self.log.close()
        for queue in self._subscribers:
            queue.put_nowait(None)

    # -- tick loop ---------------------------------------------------------------

    def start(self, loop: asyncio.AbstractEventLoop):
        self._task = loop.create_task(self._run())

    async def _run(self):
        try:
            while not self.closed:
                await asyncio.sleep(self.sim.clock.tick_duration)
                self._tick()
        except asyncio.CancelledError:
            pass

    def _tick(self):
        sample, received = self._latest_input
        if time.monotonic() - received > INPUT_STALENESS_S:
            sample = UserAction(0, 0)

        if not sample.is_zero:
            settle = self.debouncer.on_input(self.world.tick, is_zero=False)
            self._handle_settle(settle, desc_hint=None)
            for d in engaged_directions(self.mode, sample):
                self.last_executed[group_of(d)] = d

        self.world, events = apply_mode_step(self.world, self.mode, sample, self.sim)
        self.log.append("input", tick=self.world.tick, lateral=sample.lateral,
                        longitudinal=sample.longitudinal,
                        engaged=[d.value for d in engaged_directions(self.mode, sample)])

        settle = self.debouncer.on_tick(self.world.tick)
        self._handle_settle(settle, desc_hint=None)

        if self.detector.update(sample) and self.strategy.uses_llm \
                and not self.pending_llm:
            self.pending_llm = True
            self.manual_overrides = set()
            ctx = SwitchContext(dict(self.last_executed), self.mode)
            snapshot = self.world
            asyncio.get_running_loop().create_task(self._llm_switch(snapshot, ctx))

        phase_out = self.switcher.on_step_events(self.world, events)
        if phase_out is not None:
            self.mode, prov = phase_out
            for slot in prov.changed_slots:
                self.changed_markers[slot] = "auto"
            self._log_switch(prov)

        index_before = self.tracker.index
        self.tracker.update(self.world)
        if self.tracker.index != index_before:
            self.log.append("stage", tick=self.world.tick, index=self.tracker.index,
                            name=self.task.stages[self.tracker.index - 1].name)

        self._broadcast(self.frame(consume=True))

    async def _llm_switch(self, snapshot: WorldState, ctx: SwitchContext):
        try:
            result = await asyncio.to_thread(self.switcher.on_pause, snapshot, ctx)
        except Exception as exc:  # defensive: backend bugs must not kill the loop
            self.log.append("error", tick=self.world.tick, message=str(exc))
            self.degraded = True
            self.pending_llm = False
            return
        self.pending_llm = False
        if result is None:
            return
        new_mode, prov = result
        self.degraded = prov.degraded
        merged = self.mode
        applied = []
        for group in DirectionGroup:
            if group in self.manual_overrides:
                continue  # manual intent wins over the stale automatic result
            proposed = new_mode.slot(group)
            if proposed is not None and merged.slot(group) is not proposed:
                merged = merged.with_slot(group, proposed)
                applied.append(group.value)
        self.mode = merged
        for slot in applied:
            self.changed_markers[slot] = "auto"
        self.last_executed = {}
        self._log_switch(prov, applied_slots=applied,
                         overridden=[g.value for g in self.manual_overrides])
        self.manual_overrides = set()

    def _handle_settle(self, event: ManualSwitchEvent | None, desc_hint):
        if event is None:
            return
        self.log.append("manual_settle", tick=event.tick, slot=event.slot.value,
                        old=event.old.value, new=event.new.value,
                        press_count=event.press_count)
        if not self.strategy.learns:
            return
        desc = self.debouncer.last_finalized_description or \
            describe_world(self.world, self.task.task_line, self.task.object_order)
        record = self.store.add_example(event, desc)
        self.log.append("example", tick=event.tick, index=record.index,
                        group_number=record.group_number, letter=record.letter,
                        action_name=record.action_name, press_count=record.press_count)
        if self.on_store_mutation:
            self.on_store_mutation()
        if self.strategy.synthesizes_rules:
            asyncio.get_running_loop().create_task(self._synthesize())

    async def _synthesize(self):
        async with self._rule_lock:
            outcome = await asyncio.to_thread(self.store.synthesize_rules, self.backend)
        self.log.append("rule_gen", tick=self.world.tick, prompt=outcome.prompt,
                        response=outcome.response,
                        rules=[r.text for r in outcome.new_rules],
                        rule_count_after=len(self.store.rules))
        if self.on_store_mutation:
            self.on_store_mutation()

    def _log_switch(self, prov: ProvenanceRecord, applied_slots=None, overridden=None):
        payload = prov.to_dict()
        if applied_slots is not None:
            payload["applied_slots"] = applied_slots
            payload["overridden_slots"] = overridden or []
        self.log.append("auto_switch", tick=self.world.tick, provenance=payload,
                        world=self.world.to_dict(),
                        last_executed={g.value: d.value
                                       for g, d in self.last_executed.items()})

    # -- frames -----------------------------------------------------------------

    def frame(self, consume: bool = False) -> dict:
        """Current state frame; only the tick loop consumes highlight markers."""
        markers = self.changed_markers
        if consume:
            self.seq += 1
            self.changed_markers = {}
        held = self.world.held_object
        slots = {}
        for group in DirectionGroup:
            direction = self.mode.slot(group)
            slots[group.value] = {
                "direction": direction.value if direction else None,
                "label": DISPLAY_NAME[direction] if direction else "(none)",
                "changed": markers.get(group.value),
            }
        return {
            "seq": self.seq,
            "tick": self.world.tick,
            "session": self.id,
            "task": self.task.name,
            "strategy": self.strategy.value,
            "mode": slots,
            "manual_switches": self.manual_count,
            "held_object": held.display_name if held else None,
            "degraded": self.degraded,
            "pending_llm": self.pending_llm,
            "stage": {"index": self.tracker.index,
                      "total": len(self.task.stages),
                      "completed": self.tracker.completed},
            "world": self.world.to_dict(),
            "closed": self.closed,
        }

    def subscribe(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue(maxsize=64)
        self._subscribers.append(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue):
        if queue in self._subscribers:
            self._subscribers.remove(queue)

    def _broadcast(self, frame: dict):
        for queue in list(self._subscribers):
            try:
                queue.put_nowait(frame)
            except asyncio.QueueFull:
                pass  # slow consumer drops frames; state is self-contained

    def _ensure_open(self):
        if self.closed:
            raise SessionClosed(self.id)


class SessionManager:
    """Owns sessions and per-task learning stores (persisted across restarts)."""

    def __init__(self, log_dir: str | Path | None = None,
                 state_dir: str | Path | None = None):
        self.log_dir = Path(log_dir) if log_dir else None
        self.state_dir = Path(state_dir) if state_dir else None
        self.sessions: dict[str, Session] = {}
        self.stores: dict[str, LearningStore] = {}
        if self.state_dir:
            self.state_dir.mkdir(parents=True, exist_ok=True)
            for path in self.state_dir.glob("store_*.json"):
                store = LearningStore.load(path)
                self.stores[store.task_name] = store

    def store_for(self, task: str) -> LearningStore:
        if task not in self.stores:
            self.stores[task] = LearningStore(task, seed=0)
        return self.stores[task]

    def persist_store(self, task: str):
        if self.state_dir and task in self.stores:
            self.stores[task].save(self.state_dir / f"store_{task}.json")

    def create(self, request: SessionRequest, loop: asyncio.AbstractEventLoop) -> Session:
        log_path = None
        if self.log_dir:
            log_path = self.log_dir / f"session_{request.task}_{uuid.uuid4().hex[:8]}.jsonl"
        session = Session(request, self.store_for(request.task), log_path,
                          on_store_mutation=lambda: self.persist_store(request.task))
        self.sessions[session.id] = session
        session.start(loop)
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id)

    def end(self, session_id: str):
        session = self.get(session_id)
        session.end()
        self.persist_store(session.task.name)

    def shutdown(self):
        for session in self.sessions.values():
            session.end()


def reconstruct_final_state(records: list[dict], sim: SimConfig | None = None
                            ) -> tuple[WorldState, ModeMapping, int]:
    """Rebuild the final (world, mode, manual count) from a session log.

    The log is the source of truth: frames must be derivable from it.
    """
    sim = sim or SimConfig()
    world: WorldState | None = None
    mode: ModeMapping | None = None
    manual = 0
    for record in records:
        kind = record["kind"]
        if kind == "layout":
            world = WorldState.from_dict(record["world"])
        elif kind == "auto_switch":
            prov = record["provenance"]
            applied = prov.get("applied_slots")
            after = ModeMapping.from_dict(prov["mapping_after"])
            if mode is None or applied is None:
                mode = after
            else:
                for slot in applied:
                    mode = mode.with_slot(DirectionGroup(slot), after.slot(DirectionGroup(slot)))
        elif kind == "manual_switch":
            mode = mode.with_slot(DirectionGroup(record["slot"]),
                                  ActionDirection(record["new"]))
            manual += 1
        elif kind == "grouped_cycle":
            mode = ModeMapping.from_dict(record["mapping"])
            manual += 1
        elif kind == "input":
            sample = UserAction(record["lateral"], record["longitudinal"])
            world, _ = apply_mode_step(world, mode, sample, sim)
    return world, mode, manual
