/** Mapping panel view model and DOM renderer.
 *
 * Highlight semantics: a slot changed by an automatic switch renders blue for
 * the frame cycle that reports it, a manually switched slot renders red; a
 * frame without a change for that slot clears the highlight.
 */

import type { SlotName, StateFrame } from "./types.js";

export type Highlight = "none" | "blue" | "red";

export interface SlotView {
  label: string;
  highlight: Highlight;
}

export interface MappingPanelModel {
  slots: Record<SlotName, SlotView>;
  manualSwitches: number;
  heldObject: string | null;
  degraded: boolean;
  pendingLlm: boolean;
  stageText: string;
  connected: boolean;
}

export const SLOT_ORDER: SlotName[] = ["up", "down", "left", "right"];

export function emptyPanel(): MappingPanelModel {
  const slots = {} as Record<SlotName, SlotView>;
  for (const slot of SLOT_ORDER) slots[slot] = { label: "-", highlight: "none" };
  return {
    slots,
    manualSwitches: 0,
    heldObject: null,
    degraded: false,
    pendingLlm: false,
    stageText: "",
    connected: false,
  };
}

export function highlightFor(changed: "auto" | "manual" | null): Highlight {
  if (changed === "auto") return "blue";
  if (changed === "manual") return "red";
  return "none";
}

/** Pure reducer: the panel is a function of the latest frame alone. */
export function panelFromFrame(frame: StateFrame): MappingPanelModel {
  const slots = {} as Record<SlotName, SlotView>;
  for (const slot of SLOT_ORDER) {
    const state = frame.mode[slot];
    slots[slot] = { label: state.label, highlight: highlightFor(state.changed) };
  }
  return {
    slots,
    manualSwitches: frame.manual_switches,
    heldObject: frame.held_object,
    degraded: frame.degraded,
    pendingLlm: frame.pending_llm,
    stageText: `stage ${frame.stage.index}/${frame.stage.total}` +
      (frame.stage.completed ? " — task complete" : ""),
    connected: true,
  };
}

const SLOT_GLYPH: Record<SlotName, string> = {
  up: "↑", down: "↓", left: "←", right: "→",
};

const HIGHLIGHT_HOLD_MS = 900;

/** Renders the panel model into a container; highlights decay visually. */
export class PanelRenderer {
  private cells = new Map<SlotName, HTMLElement>();
  private counter: HTMLElement;
  private held: HTMLElement;
  private status: HTMLElement;
  private decayTimers = new Map<SlotName, number>();

  constructor(private root: HTMLElement) {
    root.classList.add("mapping-panel");
    const grid = document.createElement("div");
    grid.className = "panel-grid";
    for (const slot of SLOT_ORDER) {
      const cell = document.createElement("div");
      cell.className = "panel-slot";
      cell.dataset.slot = slot;
      const glyph = document.createElement("span");
      glyph.className = "slot-glyph";
      glyph.textContent = SLOT_GLYPH[slot];
      const label = document.createElement("span");
      label.className = "slot-label";
      cell.append(glyph, label);
      grid.appendChild(cell);
      this.cells.set(slot, cell);
    }
    this.counter = document.createElement("div");
    this.counter.className = "panel-counter";
    this.held = document.createElement("div");
    this.held.className = "panel-held";
    this.status = document.createElement("div");
    this.status.className = "panel-status";
    root.append(grid, this.counter, this.held, this.status);
  }

  render(model: MappingPanelModel): void {
    for (const slot of SLOT_ORDER) {
      const cell = this.cells.get(slot)!;
      const view = model.slots[slot];
      cell.querySelector(".slot-label")!.textContent = view.label;
      if (view.highlight !== "none") {
        cell.classList.remove("hl-blue", "hl-red");
        cell.classList.add(view.highlight === "blue" ? "hl-blue" : "hl-red");
        const old = this.decayTimers.get(slot);
        if (old !== undefined) clearTimeout(old);
        this.decayTimers.set(slot, setTimeout(() => {
          cell.classList.remove("hl-blue", "hl-red");
        }, HIGHLIGHT_HOLD_MS) as unknown as number);
      }
    }
    this.counter.textContent = `manual switches: ${model.manualSwitches}`;
    this.held.textContent = model.heldObject
      ? `holding: ${model.heldObject}` : "holding: nothing";
    const bits = [model.stageText];
    if (model.pendingLlm) bits.push("thinking…");
    if (model.degraded) bits.push("DEGRADED: predictor unavailable");
    if (!model.connected) bits.push("RECONNECTING…");
    this.status.textContent = bits.filter(Boolean).join("  ·  ");
    this.status.classList.toggle("degraded", model.degraded || !model.connected);
  }
}
