import { describe, expect, it } from "vitest";

import { emptyPanel, highlightFor, panelFromFrame } from "../src/panel.js";
import type { StateFrame } from "../src/types.js";

function frame(overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    seq: 1,
    tick: 10,
    session: "s",
    task: "water_pouring",
    strategy: "lams",
    mode: {
      up: { direction: "move_forward", label: "Move forward", changed: null },
      down: { direction: "close_gripper", label: "Close gripper", changed: null },
      left: { direction: "move_left", label: "Move left", changed: null },
      right: { direction: "move_right", label: "Move right", changed: null },
    },
    manual_switches: 0,
    held_object: null,
    degraded: false,
    pending_llm: false,
    stage: { index: 0, total: 8, completed: false },
    world: { ee_pose: { x: 0, y: 0, z: 0, roll: 0, pitch: 0, yaw: 0 },
             gripper_aperture: 1, objects: [], tick: 10 },
    closed: false,
    ...overrides,
  };
}

describe("highlight mapping", () => {
  it("maps change provenance to colors", () => {
    expect(highlightFor("auto")).toBe("blue");
    expect(highlightFor("manual")).toBe("red");
    expect(highlightFor(null)).toBe("none");
  });
});

describe("panelFromFrame", () => {
  it("is a pure function of the latest frame", () => {
    const f = frame();
    f.mode.up.changed = "auto";
    const first = panelFromFrame(f);
    expect(first.slots.up.highlight).toBe("blue");
    expect(first.slots.down.highlight).toBe("none");

    // next frame without a change clears the highlight
    const second = panelFromFrame(frame());
    expect(second.slots.up.highlight).toBe("none");
  });

  it("renders manual changes red with the counter", () => {
    const f = frame({ manual_switches: 3 });
    f.mode.left.changed = "manual";
    const model = panelFromFrame(f);
    expect(model.slots.left.highlight).toBe("red");
    expect(model.manualSwitches).toBe(3);
  });

  it("carries held object, degraded flag and stage text", () => {
    const model = panelFromFrame(frame({
      held_object: "bottle cap", degraded: true,
      stage: { index: 8, total: 8, completed: true },
    }));
    expect(model.heldObject).toBe("bottle cap");
    expect(model.degraded).toBe(true);
    expect(model.stageText).toContain("task complete");
  });

  it("starts from a disconnected empty panel", () => {
    const model = emptyPanel();
    expect(model.connected).toBe(false);
    expect(model.slots.up.label).toBe("-");
  });
});
