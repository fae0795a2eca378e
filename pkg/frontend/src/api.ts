/** Service client: commands over HTTP, frames over a server-sent event stream.
 *
 * The stream parser works on fetch ReadableStreams so the same code runs in
 * the browser and under node-based tests.
 */

import type { CreateSessionOptions, LearningView, StateFrame } from "./types.js";

export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  private async post(path: string, body?: unknown): Promise<unknown> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`${path} failed: ${response.status} ${await response.text()}`);
    }
    return response.json();
  }

  async createSession(options: CreateSessionOptions): Promise<{ session_id: string; frame: StateFrame }> {
    return (await this.post("/sessions", options)) as { session_id: string; frame: StateFrame };
  }

  async sendInput(sessionId: string, lateral: number, longitudinal: number): Promise<void> {
    await this.post(`/sessions/${sessionId}/input`, { lateral, longitudinal });
  }

  async manualSwitch(sessionId: string, slot: string): Promise<void> {
    await this.post(`/sessions/${sessionId}/manual_switch`, { slot });
  }

  async groupedCycle(sessionId: string): Promise<void> {
    await this.post(`/sessions/${sessionId}/grouped_cycle`);
  }

  async endSession(sessionId: string): Promise<void> {
    await this.post(`/sessions/${sessionId}/end`);
  }

  async state(sessionId: string): Promise<StateFrame> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/state`);
    if (!response.ok) throw new Error(`state failed: ${response.status}`);
    return (await response.json()) as StateFrame;
  }

  async learning(sessionId: string): Promise<LearningView> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/learning`);
    if (!response.ok) throw new Error(`learning failed: ${response.status}`);
    return (await response.json()) as LearningView;
  }

  /** Open the frame stream; the callback fires per frame until closed. */
  streamFrames(
    sessionId: string,
    onFrame: (frame: StateFrame) => void,
    onError?: (error: unknown) => void,
  ): { close: () => void } {
    const controller = new AbortController();
    (async () => {
      try {
        const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/stream`, {
          signal: controller.signal,
        });
        if (!response.ok || !response.body) {
          throw new Error(`stream failed: ${response.status}`);
        }
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          let newline;
          while ((newline = buffer.indexOf("\n")) >= 0) {
            const line = buffer.slice(0, newline).trimEnd();
            buffer = buffer.slice(newline + 1);
            if (line.startsWith("data: ")) {
              onFrame(JSON.parse(line.slice(6)) as StateFrame);
            }
          }
        }
      } catch (error) {
        if (!controller.signal.aborted && onError) onError(error);
      }
    })();
    return { close: () => controller.abort() };
  }
}
