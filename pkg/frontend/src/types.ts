/** Wire types mirroring the session service's frame and command schemas. */

export type SlotName = "up" | "down" | "left" | "right";

export interface SlotState {
  direction: string | null;
  label: string;
  changed: "auto" | "manual" | null;
}

export interface Pose {
  x: number;
  y: number;
  z: number;
  roll: number;
  pitch: number;
  yaw: number;
}

export interface ObjectSnapshot {
  id: string;
  kind: string;
  pose: Pose;
  held: boolean;
  dropped: boolean;
}

export interface WorldSnapshot {
  ee_pose: Pose;
  gripper_aperture: number;
  objects: ObjectSnapshot[];
  tick: number;
}

export interface StateFrame {
  seq: number;
  tick: number;
  session: string;
  task: string;
  strategy: string;
  mode: Record<SlotName, SlotState>;
  manual_switches: number;
  held_object: string | null;
  degraded: boolean;
  pending_llm: boolean;
  stage: { index: number; total: number; completed: boolean };
  world: WorldSnapshot;
  closed: boolean;
}

export interface CreateSessionOptions {
  task: string;
  strategy?: string;
  layout_seed?: number;
  backend?: string;
  tick_duration?: number;
  pause_threshold?: number;
}

export interface LearningView {
  examples: string[];
  rules: string[];
}
