/** Scripted end-to-end cockpit run against a live mock-backed service.
 *
 * Exercises the published semantics through the real client and panel code:
 * a 1.5 s stick pause produces a blue (automatic) highlight, a D-pad manual
 * switch produces a red highlight plus a counter increment, and a grouped
 * cycle changes all four labels while incrementing the counter by one.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { panelFromFrame } from "../src/panel.js";
import type { StateFrame } from "../src/types.js";

const PORT = 8761;
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForHealth(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "cockpit-e2e-"));
  service = spawn(
    "python3",
    ["-m", "lams.service", "--port", String(PORT),
     "--log-dir", join(dir, "logs"), "--state-dir", join(dir, "state")],
    { cwd: join(__dirname, "..", ".."), stdio: "inherit" },
  );
  await waitForHealth();
}, 30000);

afterAll(() => {
  service?.kill();
});

class FrameWatcher {
  frames: StateFrame[] = [];
  private waiters: Array<{
    predicate: (f: StateFrame) => boolean;
    resolve: (f: StateFrame) => void;
  }> = [];
  private stream: { close: () => void };

  constructor(client: ServiceClient, sessionId: string) {
    this.stream = client.streamFrames(sessionId, (frame) => {
      this.frames.push(frame);
      for (const waiter of [...this.waiters]) {
        if (waiter.predicate(frame)) {
          this.waiters.splice(this.waiters.indexOf(waiter), 1);
          waiter.resolve(frame);
        }
      }
    });
  }

  waitFor(predicate: (f: StateFrame) => boolean, timeoutMs = 8000): Promise<StateFrame> {
    const already = this.frames.find(predicate);
    if (already) return Promise.resolve(already);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("no frame matched within timeout")), timeoutMs);
      this.waiters.push({
        predicate,
        resolve: (frame) => {
          clearTimeout(timer);
          resolve(frame);
        },
      });
    });
  }

  close(): void {
    this.stream.close();
  }
}

describe("cockpit round trip", () => {
  it("pause-triggered auto switch shows a blue highlight", async () => {
    const client = new ServiceClient(BASE);
    const { session_id } = await client.createSession({
      task: "water_pouring", strategy: "lams", layout_seed: 7,
    });
    const watcher = new FrameWatcher(client, session_id);

    // drive "down" (mapped to Close gripper by the demo script) at 20 Hz for
    // 0.8 s, then stream zero samples; stillness reaches 1.5 s and the
    // service asks the predictor for a new mapping
    for (let i = 0; i < 16; i++) {
      await client.sendInput(session_id, 0, -1);
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
    const zeroPump = setInterval(() => {
      client.sendInput(session_id, 0, 0).catch(() => {});
    }, 50);

    try {
      const frame = await watcher.waitFor(
        (f) => f.mode.up.changed === "auto" && f.mode.up.direction === "move_up");
      const model = panelFromFrame(frame);
      expect(model.slots.up.highlight).toBe("blue");
      expect(model.manualSwitches).toBe(0);
    } finally {
      clearInterval(zeroPump);
      watcher.close();
      await client.endSession(session_id);
    }
  }, 20000);

  it("manual switch shows red and increments the counter", async () => {
    const client = new ServiceClient(BASE);
    const { session_id } = await client.createSession({
      task: "water_pouring", strategy: "lams", layout_seed: 7,
    });
    const watcher = new FrameWatcher(client, session_id);
    try {
      await watcher.waitFor((f) => f.seq > 0);
      await client.manualSwitch(session_id, "up");
      const frame = await watcher.waitFor(
        (f) => f.manual_switches === 1 && f.mode.up.changed === "manual");
      const model = panelFromFrame(frame);
      expect(model.slots.up.highlight).toBe("red");
      expect(model.manualSwitches).toBe(1);
    } finally {
      watcher.close();
      await client.endSession(session_id);
    }
  }, 20000);

  it("grouped cycle changes all four labels with counter +1", async () => {
    const client = new ServiceClient(BASE);
    const { session_id, frame: initial } = await client.createSession({
      task: "book_storage", strategy: "grouped_mapping", layout_seed: 3,
    });
    const before = initial.mode;
    const watcher = new FrameWatcher(client, session_id);
    try {
      await watcher.waitFor((f) => f.seq > 0);
      await client.groupedCycle(session_id);
      const frame = await watcher.waitFor((f) => f.manual_switches === 1);
      const model = panelFromFrame(frame);
      for (const slot of ["up", "down", "left", "right"] as const) {
        expect(frame.mode[slot].direction).not.toBe(before[slot].direction);
        expect(model.slots[slot].highlight).toBe("red");
      }
      expect(model.manualSwitches).toBe(1);

      // D-pad switching is refused on grouped sessions
      await expect(client.manualSwitch(session_id, "up")).rejects.toThrow();
    } finally {
      watcher.close();
      await client.endSession(session_id);
    }
  }, 20000);
});
