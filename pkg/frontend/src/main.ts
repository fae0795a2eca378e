/** Cockpit wiring: session lifecycle, stream consumption, input forwarding. */

import { ServiceClient } from "./api.js";
import { InputCapture } from "./input.js";
import { MappingPanelModel, PanelRenderer, emptyPanel, panelFromFrame } from "./panel.js";
import { SceneRenderer } from "./scene.js";
import type { StateFrame } from "./types.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8700";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class Cockpit {
  private client: ServiceClient;
  private sessionId: string | null = null;
  private stream: { close: () => void } | null = null;
  private panel: PanelRenderer;
  private scene: SceneRenderer;
  private capture: InputCapture;
  private lastModel: MappingPanelModel = emptyPanel();
  private strategy = "lams";

  constructor() {
    this.client = new ServiceClient(
      (el<HTMLInputElement>("service-url").value || DEFAULT_SERVICE).replace(/\/$/, ""));
    this.panel = new PanelRenderer(el("panel"));
    this.scene = new SceneRenderer(el<HTMLCanvasElement>("scene"));
    this.capture = new InputCapture({
      onSample: (lateral, longitudinal) => {
        if (this.sessionId) {
          this.client.sendInput(this.sessionId, lateral, longitudinal).catch(() => {
            this.markDisconnected();
          });
        }
      },
      onManualSwitch: (slot) => {
        if (this.sessionId && this.strategy !== "grouped_mapping") {
          this.client.manualSwitch(this.sessionId, slot).catch(() => {});
        }
      },
      onGroupedCycle: () => {
        if (this.sessionId && this.strategy === "grouped_mapping") {
          this.client.groupedCycle(this.sessionId).catch(() => {});
        }
      },
    });
    this.panel.render(this.lastModel);
  }

  async start(): Promise<void> {
    await this.stop();
    const task = el<HTMLSelectElement>("task").value;
    this.strategy = el<HTMLSelectElement>("strategy").value;
    const seed = parseInt(el<HTMLInputElement>("seed").value, 10) || 1;
    this.client = new ServiceClient(
      (el<HTMLInputElement>("service-url").value || DEFAULT_SERVICE).replace(/\/$/, ""));
    const { session_id, frame } = await this.client.createSession({
      task, strategy: this.strategy, layout_seed: seed,
    });
    this.sessionId = session_id;
    this.onFrame(frame);
    this.stream = this.client.streamFrames(
      session_id,
      (f) => this.onFrame(f),
      () => this.markDisconnected(),
    );
    this.capture.start();
  }

  async stop(): Promise<void> {
    this.capture.stop();
    if (this.stream) {
      this.stream.close();
      this.stream = null;
    }
    if (this.sessionId) {
      await this.client.endSession(this.sessionId).catch(() => {});
      this.sessionId = null;
    }
  }

  private onFrame(frame: StateFrame): void {
    this.lastModel = panelFromFrame(frame);
    this.panel.render(this.lastModel);
    this.scene.render(frame.world);
    if (frame.seq % 10 === 0) this.refreshLearning();
  }

  private markDisconnected(): void {
    this.panel.render({ ...this.lastModel, connected: false });
  }

  private refreshLearning(): void {
    if (!this.sessionId) return;
    this.client.learning(this.sessionId).then((view) => {
      el("rules").textContent =
        view.rules.length ? view.rules.map((r, i) => `${i + 1}. ${r}`).join("\n\n")
          : "(no rules yet)";
      el("examples").textContent =
        view.examples.length ? view.examples.join("\n\n") : "(no examples yet)";
    }).catch(() => {});
  }
}

const cockpit = new Cockpit();
el("start").addEventListener("click", () => {
  cockpit.start().catch((error) => alert(`session failed: ${error}`));
});
el("stop").addEventListener("click", () => void cockpit.stop());
window.addEventListener("beforeunload", () => void cockpit.stop());
