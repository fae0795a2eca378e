/** 2.5D scene view: top-down main canvas with a side-elevation inset.
 *
 * Pure render of server world snapshots; nothing is simulated client-side.
 */

import type { ObjectSnapshot, WorldSnapshot } from "./types.js";

const WORKSPACE = 0.8; // meters per axis

const KIND_COLORS: Record<string, string> = {
  bottle_cap: "#d97706",
  bottle: "#2563eb",
  bowl: "#059669",
  book: "#7c3aed",
  shelf: "#6b7280",
};

const KIND_RADIUS: Record<string, number> = {
  bottle_cap: 0.018, bottle: 0.035, bowl: 0.06, book: 0.05, shelf: 0.07,
};

export class SceneRenderer {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  render(world: WorldSnapshot): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, width, height);

    const topSize = Math.min(width, height * 0.72);
    this.renderTop(world, 0, 0, topSize);
    this.renderSide(world, 0, topSize + 8, topSize, height - topSize - 8);
  }

  /** Top view: x grows upward (away from the operator), y grows leftward. */
  private topPoint(x: number, y: number, ox: number, oy: number, size: number) {
    return [ox + (1 - y / WORKSPACE) * size, oy + (1 - x / WORKSPACE) * size];
  }

  private renderTop(world: WorldSnapshot, ox: number, oy: number, size: number): void {
    const ctx = this.ctx;
    ctx.fillStyle = "#f8fafc";
    ctx.fillRect(ox, oy, size, size);
    ctx.strokeStyle = "#cbd5e1";
    ctx.strokeRect(ox, oy, size, size);

    for (const obj of world.objects) {
      const [px, py] = this.topPoint(obj.pose.x, obj.pose.y, ox, oy, size);
      this.drawObject(obj, px, py, size);
    }

    const ee = world.ee_pose;
    const [ex, ey] = this.topPoint(ee.x, ee.y, ox, oy, size);
    ctx.save();
    ctx.translate(ex, ey);
    // yaw 90° points the tool "forward" (up in the top view); +yaw swings left
    ctx.rotate(-((ee.yaw - 90) * Math.PI) / 180);
    ctx.strokeStyle = world.gripper_aperture < 0.5 ? "#dc2626" : "#0f172a";
    ctx.lineWidth = 2;
    const jaw = 4 + world.gripper_aperture * 8;
    ctx.beginPath();
    ctx.moveTo(-jaw, -10);
    ctx.lineTo(-jaw, 4);
    ctx.moveTo(jaw, -10);
    ctx.lineTo(jaw, 4);
    ctx.moveTo(-jaw, 4);
    ctx.lineTo(jaw, 4);
    ctx.stroke();
    ctx.restore();
  }

  private renderSide(world: WorldSnapshot, ox: number, oy: number,
                     w: number, h: number): void {
    const ctx = this.ctx;
    if (h <= 10) return;
    ctx.fillStyle = "#f1f5f9";
    ctx.fillRect(ox, oy, w, h);
    ctx.strokeStyle = "#cbd5e1";
    ctx.strokeRect(ox, oy, w, h);
    const sx = (x: number) => ox + (x / WORKSPACE) * w;
    const sz = (z: number) => oy + h - (z / 0.5) * h;

    ctx.strokeStyle = "#94a3b8";
    ctx.beginPath();
    ctx.moveTo(ox, sz(0));
    ctx.lineTo(ox + w, sz(0));
    ctx.stroke();

    for (const obj of world.objects) {
      ctx.fillStyle = KIND_COLORS[obj.kind] ?? "#111827";
      const r = (KIND_RADIUS[obj.kind] ?? 0.03) / WORKSPACE * w * 0.8;
      ctx.beginPath();
      ctx.arc(sx(obj.pose.x), sz(obj.pose.z), Math.max(3, r), 0, Math.PI * 2);
      ctx.fill();
    }
    ctx.fillStyle = "#0f172a";
    ctx.beginPath();
    ctx.arc(sx(world.ee_pose.x), sz(world.ee_pose.z), 5, 0, Math.PI * 2);
    ctx.fill();
  }

  private drawObject(obj: ObjectSnapshot, px: number, py: number, size: number): void {
    const ctx = this.ctx;
    const radius = ((KIND_RADIUS[obj.kind] ?? 0.03) / WORKSPACE) * size;
    ctx.fillStyle = KIND_COLORS[obj.kind] ?? "#111827";
    ctx.globalAlpha = obj.dropped ? 0.45 : 1.0;
    if (obj.kind === "shelf" || obj.kind === "book") {
      const yaw = ((obj.pose.yaw - 90) * Math.PI) / 180;
      ctx.save();
      ctx.translate(px, py);
      ctx.rotate(-yaw);
      ctx.fillRect(-radius, -radius * 0.4, radius * 2, radius * 0.8);
      ctx.restore();
    } else {
      ctx.beginPath();
      ctx.arc(px, py, radius, 0, Math.PI * 2);
      ctx.fill();
    }
    ctx.globalAlpha = 1.0;
    if (obj.held) {
      ctx.strokeStyle = "#dc2626";
      ctx.beginPath();
      ctx.arc(px, py, radius + 3, 0, Math.PI * 2);
      ctx.stroke();
    }
  }
}
