/** Joystick/keyboard capture sampled at a fixed rate.
 *
 * Keyboard arrows or WASD drive the axes; IJKL (or a gamepad D-pad) request
 * per-slot manual switches; X cycles grouped mappings. Zero samples are sent
 * too: the service's pause detector depends on a steady sample stream.
 */

import type { SlotName } from "./types.js";

export const SAMPLE_HZ = 20;
export const DEAD_ZONE = 0.1;

export interface InputEvents {
  onSample: (lateral: number, longitudinal: number) => void;
  onManualSwitch: (slot: SlotName) => void;
  onGroupedCycle: () => void;
}

export function applyDeadZone(value: number): number {
  const clamped = Math.max(-1, Math.min(1, value));
  return Math.abs(clamped) < DEAD_ZONE ? 0 : clamped;
}

const AXIS_KEYS: Record<string, [number, number]> = {
  ArrowUp: [0, 1], KeyW: [0, 1],
  ArrowDown: [0, -1], KeyS: [0, -1],
  ArrowLeft: [-1, 0], KeyA: [-1, 0],
  ArrowRight: [1, 0], KeyD: [1, 0],
};

const SWITCH_KEYS: Record<string, SlotName> = {
  KeyI: "up", KeyK: "down", KeyJ: "left", KeyL: "right",
};

// Standard gamepad mapping: d-pad buttons 12-15, X button 2.
const GAMEPAD_DPAD: Array<[number, SlotName]> = [
  [12, "up"], [13, "down"], [14, "left"], [15, "right"],
];
const GAMEPAD_X = 2;

/** Axes state derived from currently held keys plus the gamepad stick. */
export function combineAxes(
  held: ReadonlySet<string>,
  stick: [number, number] | null,
): { lateral: number; longitudinal: number } {
  let lateral = 0;
  let longitudinal = 0;
  for (const key of held) {
    const axes = AXIS_KEYS[key];
    if (axes) {
      lateral += axes[0];
      longitudinal += axes[1];
    }
  }
  if (stick) {
    // browser sticks report +down; the service expects +up longitudinally
    lateral += stick[0];
    longitudinal -= stick[1];
  }
  return {
    lateral: applyDeadZone(lateral),
    longitudinal: applyDeadZone(longitudinal),
  };
}

export class InputCapture {
  private held = new Set<string>();
  private timer: number | null = null;
  private previousButtons: boolean[] = [];

  constructor(private events: InputEvents) {}

  start(): void {
    window.addEventListener("keydown", this.onKeyDown);
    window.addEventListener("keyup", this.onKeyUp);
    this.timer = setInterval(() => this.sample(), 1000 / SAMPLE_HZ) as unknown as number;
  }

  stop(): void {
    window.removeEventListener("keydown", this.onKeyDown);
    window.removeEventListener("keyup", this.onKeyUp);
    if (this.timer !== null) clearInterval(this.timer);
  }

  private onKeyDown = (event: KeyboardEvent): void => {
    if (event.repeat) return;
    if (AXIS_KEYS[event.code]) {
      this.held.add(event.code);
      event.preventDefault();
    } else if (SWITCH_KEYS[event.code]) {
      this.events.onManualSwitch(SWITCH_KEYS[event.code]);
    } else if (event.code === "KeyX") {
      this.events.onGroupedCycle();
    }
  };

  private onKeyUp = (event: KeyboardEvent): void => {
    this.held.delete(event.code);
  };

  private sample(): void {
    const pad = this.pollGamepad();
    const { lateral, longitudinal } = combineAxes(this.held, pad);
    this.events.onSample(lateral, longitudinal);
  }

  private pollGamepad(): [number, number] | null {
    if (typeof navigator === "undefined" || !navigator.getGamepads) return null;
    const pad = navigator.getGamepads()[0];
    if (!pad) return null;
    const pressed = pad.buttons.map((b) => b.pressed);
    for (const [index, slot] of GAMEPAD_DPAD) {
      if (pressed[index] && !this.previousButtons[index]) {
        this.events.onManualSwitch(slot);
      }
    }
    if (pressed[GAMEPAD_X] && !this.previousButtons[GAMEPAD_X]) {
      this.events.onGroupedCycle();
    }
    this.previousButtons = pressed;
    return [pad.axes[0] ?? 0, pad.axes[1] ?? 0];
  }
}
