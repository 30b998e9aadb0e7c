// Minimal line plots for the rolling telemetry buffers. No plotting
// dependency: each panel is a few polylines on a canvas.

import { SeriesBuffer, TraceSet } from "./buffers.js";
import { COLORS, Ctx2D } from "./scene.js";

export interface PlotRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

const SERIES_COLORS = [
  "#7aa2f7",
  "#e0af68",
  "#9ece6a",
  "#f7768e",
  "#bb9af7",
  "#7dcfff",
];

export function seriesColor(index: number): string {
  return SERIES_COLORS[index % SERIES_COLORS.length];
}

function niceRange(lo: number, hi: number): [number, number] {
  if (lo === hi) {
    const pad = Math.abs(lo) * 0.1 + 1e-6;
    return [lo - pad, hi + pad];
  }
  const pad = (hi - lo) * 0.08;
  return [lo - pad, hi + pad];
}

function drawFrame(ctx: Ctx2D, rect: PlotRect, title: string) {
  ctx.fillStyle = "rgba(0,0,0,0.25)";
  ctx.fillRect(rect.x, rect.y, rect.width, rect.height);
  ctx.strokeStyle = COLORS.goalInactive;
  ctx.lineWidth = 1;
  ctx.strokeRect(rect.x, rect.y, rect.width, rect.height);
  ctx.fillStyle = COLORS.text;
  ctx.font = "11px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(title, rect.x + 6, rect.y + 14);
}

function drawSeriesLine(
  ctx: Ctx2D,
  rect: PlotRect,
  buf: SeriesBuffer,
  tSpan: [number, number],
  vSpan: [number, number],
  color: string,
) {
  const [t0, t1] = tSpan;
  const [v0, v1] = vSpan;
  if (t1 <= t0 || buf.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let started = false;
  for (let i = 0; i < buf.length; i++) {
    const v = buf.values[i];
    if (!Number.isFinite(v)) {
      started = false;
      continue;
    }
    const x = rect.x + ((buf.times[i] - t0) / (t1 - t0)) * rect.width;
    const y =
      rect.y + rect.height - ((v - v0) / (v1 - v0)) * rect.height;
    if (!started) {
      ctx.moveTo(x, y);
      started = true;
    } else {
      ctx.lineTo(x, y);
    }
  }
  ctx.stroke();
}

/** Shared time span across a trace set: trailing window ending at t_max. */
function timeSpan(bufs: SeriesBuffer[], windowSeconds: number): [number, number] {
  let tMax = -Infinity;
  for (const b of bufs) {
    const last = b.times[b.times.length - 1];
    if (last !== undefined && last > tMax) tMax = last;
  }
  if (!Number.isFinite(tMax)) return [0, 1];
  return [tMax - windowSeconds, tMax];
}

export function drawTraceSet(
  ctx: Ctx2D,
  rect: PlotRect,
  traces: TraceSet,
  title: string,
): void {
  drawFrame(ctx, rect, title);
  const range = traces.valueRange();
  if (!range) return;
  const vSpan = niceRange(range[0], range[1]);
  const bufs = [...traces.series.values()];
  const tSpan = timeSpan(bufs, traces.windowSeconds);
  const inner: PlotRect = {
    x: rect.x + 4,
    y: rect.y + 20,
    width: rect.width - 8,
    height: rect.height - 26,
  };
  let i = 0;
  for (const [name, buf] of traces.series) {
    const color = seriesColor(i);
    drawSeriesLine(ctx, inner, buf, tSpan, vSpan, color);
    // legend entry with the latest value
    const latest = buf.values[buf.values.length - 1];
    ctx.fillStyle = color;
    ctx.font = "10px monospace";
    ctx.textAlign = "left";
    const label = Number.isFinite(latest)
      ? `${name} ${latest.toPrecision(3)}`
      : name;
    ctx.fillText(label, rect.x + 80 * i + 56, rect.y + 14);
    i++;
  }
}

export function drawSingleSeries(
  ctx: Ctx2D,
  rect: PlotRect,
  buf: SeriesBuffer,
  title: string,
): void {
  drawFrame(ctx, rect, title);
  const range = buf.valueRange();
  if (!range) return;
  const vSpan = niceRange(Math.min(range[0], 0), range[1]);
  const tSpan = timeSpan([buf], buf.windowSeconds);
  const inner: PlotRect = {
    x: rect.x + 4,
    y: rect.y + 20,
    width: rect.width - 8,
    height: rect.height - 26,
  };
  drawSeriesLine(ctx, inner, buf, tSpan, vSpan, COLORS.accent);
  const latest = buf.values[buf.values.length - 1];
  if (Number.isFinite(latest)) {
    ctx.fillStyle = COLORS.text;
    ctx.font = "10px monospace";
    ctx.textAlign = "left";
    ctx.fillText(latest.toPrecision(3), rect.x + rect.width - 52, rect.y + 14);
  }
}
