// 2D canvas view of the running task, plus an inset trace of the plan the
// planner is currently publishing. Drawing goes through a structural
// subset of CanvasRenderingContext2D so tests can pass a recording stub.

import { Hello, TelemetryFrame } from "./protocol.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  textAlign: CanvasTextAlign;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(angle: number): void;
  setLineDash(segments: number[]): void;
}

export interface Viewport {
  width: number;
  height: number;
}

export const COLORS = {
  background: "#10141a",
  body: "#d8dee9",
  accent: "#7aa2f7",
  goal: "#9ece6a",
  goalInactive: "#39445a",
  trace: "#e0af68",
  text: "#8a93a6",
  warn: "#f7768e",
};

/** Model family a task name belongs to, by its leading token. */
export function sceneKind(task: string): string {
  return task.split("-")[0];
}

/** Pixels per world unit so each task fits its canvas comfortably. */
function worldScale(kind: string, view: Viewport): number {
  const extent: Record<string, number> = {
    pendulum: 2.6, // rod length 1, swing circle plus margin
    cartpole: 4.0, // track span
    acrobot: 4.4, // two links of length 1
    particle: 1.2, // unit box
  };
  const span = extent[kind] ?? 4.0;
  return Math.min(view.width, view.height) / span;
}

export function drawScene(
  ctx: Ctx2D,
  view: Viewport,
  frame: TelemetryFrame,
  hello: Hello,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, view.width, view.height);
  const kind = sceneKind(frame.task);
  const scale = worldScale(kind, view);
  ctx.save();
  ctx.translate(view.width / 2, view.height / 2);
  switch (kind) {
    case "pendulum":
      drawPendulum(ctx, frame, scale);
      break;
    case "cartpole":
      drawCartpole(ctx, frame, scale);
      break;
    case "acrobot":
      drawAcrobot(ctx, frame, scale);
      break;
    case "particle":
      drawParticle(ctx, frame, hello, scale);
      break;
    default:
      drawStateReadout(ctx, frame);
      break;
  }
  ctx.restore();
  drawPlanTrace(ctx, view, frame, hello);
  if (frame.paused) {
    ctx.fillStyle = COLORS.warn;
    ctx.font = "14px sans-serif";
    ctx.textAlign = "left";
    ctx.fillText("paused", 12, 22);
  }
}

/** Angles are measured from hanging down; screen y grows downward. */
function jointEnd(
  x0: number,
  y0: number,
  angle: number,
  length: number,
): [number, number] {
  return [x0 + length * Math.sin(angle), y0 + length * Math.cos(angle)];
}

function drawRod(ctx: Ctx2D, x0: number, y0: number, x1: number, y1: number) {
  ctx.strokeStyle = COLORS.body;
  ctx.lineWidth = 5;
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
}

function drawBob(ctx: Ctx2D, x: number, y: number, r: number, color: string) {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function drawPendulum(ctx: Ctx2D, frame: TelemetryFrame, scale: number) {
  const [bx, by] = jointEnd(0, 0, frame.qpos[0], scale);
  // goal marker straight up from the pivot
  ctx.strokeStyle = COLORS.goalInactive;
  ctx.lineWidth = 2;
  ctx.setLineDash([4, 6]);
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.lineTo(0, -scale);
  ctx.stroke();
  ctx.setLineDash([]);
  drawRod(ctx, 0, 0, bx, by);
  drawBob(ctx, 0, 0, 5, COLORS.text);
  drawBob(ctx, bx, by, 11, COLORS.accent);
  drawTorqueArc(ctx, frame.action[0] ?? 0, 24);
}

function drawTorqueArc(ctx: Ctx2D, torque: number, radius: number) {
  if (Math.abs(torque) < 1e-3) return;
  const span = Math.min(Math.abs(torque), 3);
  ctx.strokeStyle = COLORS.trace;
  ctx.lineWidth = 3;
  ctx.beginPath();
  if (torque > 0) {
    ctx.arc(0, 0, radius, -Math.PI / 2, -Math.PI / 2 + span);
  } else {
    ctx.arc(0, 0, radius, -Math.PI / 2 - span, -Math.PI / 2);
  }
  ctx.stroke();
}

function drawCartpole(ctx: Ctx2D, frame: TelemetryFrame, scale: number) {
  const cartX = frame.qpos[0] * scale;
  const poleLen = scale;
  ctx.strokeStyle = COLORS.goalInactive;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(-1.8 * scale, 0);
  ctx.lineTo(1.8 * scale, 0);
  ctx.stroke();
  ctx.fillStyle = COLORS.body;
  ctx.fillRect(cartX - 22, -12, 44, 24);
  const [px, py] = jointEnd(cartX, 0, frame.qpos[1], poleLen);
  drawRod(ctx, cartX, 0, px, py);
  drawBob(ctx, px, py, 9, COLORS.accent);
}

function drawAcrobot(ctx: Ctx2D, frame: TelemetryFrame, scale: number) {
  const l = scale;
  const [x1, y1] = jointEnd(0, 0, frame.qpos[0], l);
  const [x2, y2] = jointEnd(x1, y1, frame.qpos[0] + frame.qpos[1], l);
  ctx.strokeStyle = COLORS.goalInactive;
  ctx.lineWidth = 2;
  ctx.setLineDash([4, 6]);
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.lineTo(0, -2 * l);
  ctx.stroke();
  ctx.setLineDash([]);
  drawRod(ctx, 0, 0, x1, y1);
  drawRod(ctx, x1, y1, x2, y2);
  drawBob(ctx, 0, 0, 5, COLORS.text);
  drawBob(ctx, x1, y1, 7, COLORS.body);
  drawBob(ctx, x2, y2, 9, COLORS.accent);
}

function drawParticle(
  ctx: Ctx2D,
  frame: TelemetryFrame,
  hello: Hello,
  scale: number,
) {
  ctx.strokeStyle = COLORS.goalInactive;
  ctx.lineWidth = 1;
  ctx.strokeRect(-0.5 * scale, -0.5 * scale, scale, scale);
  hello.goals.forEach((g, i) => {
    const active = i === frame.goal_index;
    ctx.strokeStyle = active ? COLORS.goal : COLORS.goalInactive;
    ctx.lineWidth = active ? 3 : 2;
    ctx.beginPath();
    ctx.arc(g[0] * scale, -g[1] * scale, 0.07 * scale, 0, 2 * Math.PI);
    ctx.stroke();
  });
  const x = frame.qpos[0] * scale;
  const y = -frame.qpos[1] * scale;
  // force arrow, scaled for visibility
  const fx = (frame.action[0] ?? 0) * 0.25 * scale;
  const fy = -(frame.action[1] ?? 0) * 0.25 * scale;
  if (Math.abs(fx) + Math.abs(fy) > 1) {
    ctx.strokeStyle = COLORS.trace;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(x, y);
    ctx.lineTo(x + fx, y + fy);
    ctx.stroke();
  }
  drawBob(ctx, x, y, 7, COLORS.accent);
}

function drawStateReadout(ctx: Ctx2D, frame: TelemetryFrame) {
  ctx.fillStyle = COLORS.text;
  ctx.font = "12px monospace";
  ctx.textAlign = "left";
  const q = frame.qpos.map((v) => v.toFixed(2)).join(", ");
  ctx.fillText(`qpos [${q}]`, -80, 0);
}

/**
 * Inset strip along the bottom: each control channel of the published
 * plan over its horizon, normalized to the control bounds.
 */
export function drawPlanTrace(
  ctx: Ctx2D,
  view: Viewport,
  frame: TelemetryFrame,
  hello: Hello,
): void {
  const n = frame.plan_times.length;
  if (n < 2) return;
  const h = Math.min(64, view.height * 0.18);
  const top = view.height - h - 8;
  const left = 8;
  const width = view.width - 16;
  ctx.globalAlpha = 0.9;
  ctx.fillStyle = "rgba(0,0,0,0.35)";
  ctx.fillRect(left, top, width, h);
  ctx.strokeStyle = COLORS.goalInactive;
  ctx.lineWidth = 1;
  ctx.strokeRect(left, top, width, h);
  const t0 = frame.plan_times[0];
  const t1 = frame.plan_times[n - 1];
  const nu = frame.plan_values[0]?.length ?? 0;
  for (let j = 0; j < nu; j++) {
    const lo = hello.control_lower[j] ?? -1;
    const hi = hello.control_upper[j] ?? 1;
    ctx.strokeStyle = j === 0 ? COLORS.trace : COLORS.accent;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    for (let i = 0; i < n; i++) {
      const x = left + ((frame.plan_times[i] - t0) / (t1 - t0)) * width;
      const frac = (frame.plan_values[i][j] - lo) / (hi - lo || 1);
      const y = top + h - Math.min(Math.max(frac, 0), 1) * h;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
  // now-marker at the left edge plus horizon label
  ctx.fillStyle = COLORS.text;
  ctx.font = "10px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(`plan ${(t1 - t0).toFixed(2)}s`, left + 4, top + 12);
  ctx.globalAlpha = 1;
}
