// Client-side session state. All numbers shown in the UI come from here,
// and everything here comes from a server message: telemetry feeds the
// scene and plots, acknowledgments feed the editable-parameter mirror.
// The mirror is never updated optimistically when a command is sent.

import {
  Ack,
  Command,
  Hello,
  RuntimeEvent,
  TelemetryFrame,
} from "./protocol.js";

export type ConnectionState = "connecting" | "live" | "stale" | "closed";

export interface ParameterMirror {
  weights: Map<string, number>;
  risk: number;
  planner: string;
  plannerSettings: Map<string, number>;
  slowdown: number;
  paused: boolean;
  task: string;
}

interface PendingCommand {
  command: Command;
  sentWallMs: number;
}

export const STALE_AFTER_MS = 1000;
const EVENT_LOG_LIMIT = 50;
export const PLOT_WINDOW_SECONDS = 10;

import { SeriesBuffer, TraceSet } from "./buffers.js";

export class SessionView {
  connection: ConnectionState = "connecting";
  hello: Hello | null = null;
  frame: TelemetryFrame | null = null;
  mirror: ParameterMirror = {
    weights: new Map(),
    risk: 0,
    planner: "",
    plannerSettings: new Map(),
    slowdown: 1,
    paused: false,
    task: "",
  };

  costPlot = new TraceSet(PLOT_WINDOW_SECONDS);
  actionPlot = new TraceSet(PLOT_WINDOW_SECONDS);
  planningPlot = new SeriesBuffer(PLOT_WINDOW_SECONDS);

  events: RuntimeEvent[] = [];
  lastError: string | null = null;
  roundTripMs: number | null = null;
  lastFrameWallMs = 0;

  private pending = new Map<number | string, PendingCommand>();

  applyHello(hello: Hello): void {
    this.hello = hello;
    this.mirror = {
      weights: new Map(hello.terms.map((t) => [t.name, t.weight])),
      risk: hello.risk,
      planner: hello.planner,
      plannerSettings: new Map(),
      slowdown: hello.slowdown,
      paused: false,
      task: hello.task,
    };
    this.clearHistory();
  }

  applyTelemetry(frame: TelemetryFrame, wallMs: number): void {
    this.frame = frame;
    this.connection = "live";
    this.lastFrameWallMs = wallMs;
    for (const [name, value] of Object.entries(frame.cost_terms)) {
      this.costPlot.push(name, frame.sim_time, value ?? NaN);
    }
    frame.action.forEach((a, i) => {
      this.actionPlot.push(`u${i}`, frame.sim_time, a);
    });
    if (frame.planning_ms !== null) {
      this.planningPlot.push(frame.sim_time, frame.planning_ms);
    }
    for (const ev of frame.events) {
      this.events.push(ev);
    }
    if (this.events.length > EVENT_LOG_LIMIT) {
      this.events.splice(0, this.events.length - EVENT_LOG_LIMIT);
    }
  }

  noteSent(id: number | string, command: Command, wallMs: number): void {
    this.pending.set(id, { command, sentWallMs: wallMs });
  }

  get pendingCount(): number {
    return this.pending.size;
  }

  applyAck(ack: Ack, wallMs: number): void {
    const sent = ack.id === null ? undefined : this.pending.get(ack.id);
    if (sent) {
      this.pending.delete(ack.id as number | string);
      this.roundTripMs = wallMs - sent.sentWallMs;
    }
    if (ack.status !== "ok") {
      this.lastError = String(ack.detail.message ?? "command rejected");
      return;
    }
    this.lastError = null;
    this.foldAck(ack);
  }

  /** Adopt the authoritative values the server echoed back. */
  private foldAck(ack: Ack): void {
    const d = ack.detail;
    switch (ack.command) {
      case "set_weight":
        this.mirror.weights.set(String(d.term), Number(d.value));
        break;
      case "set_risk":
        this.mirror.risk = Number(d.value);
        break;
      case "set_planner":
        this.mirror.planner = String(d.kind);
        this.mirror.plannerSettings.clear();
        break;
      case "set_planner_setting":
        this.mirror.plannerSettings.set(String(d.name), Number(d.value));
        break;
      case "set_slowdown":
        this.mirror.slowdown = Number(d.value);
        break;
      case "pause":
      case "resume":
        this.mirror.paused = Boolean(d.paused);
        break;
      case "set_task": {
        // The ack carries the full control surface for the new task, the
        // same fields the hello opened with; rebuild the mirror from it
        // and keep the catalog parts (tasks, planners) of the old hello.
        const surface = d as unknown as Omit<Hello, "type" | "schema">;
        if (this.hello) {
          this.hello = { ...this.hello, ...surface };
        }
        this.mirror = {
          weights: new Map(surface.terms.map((t) => [t.name, t.weight])),
          risk: surface.risk,
          planner: surface.planner,
          plannerSettings: new Map(),
          slowdown: surface.slowdown,
          paused: false,
          task: surface.task,
        };
        this.clearHistory();
        break;
      }
      case "reset":
        this.clearHistory();
        break;
      default:
        break;
    }
  }

  /** Called periodically; flips live sessions to stale when frames stop. */
  refreshStaleness(wallMs: number): void {
    if (
      this.connection === "live" &&
      wallMs - this.lastFrameWallMs > STALE_AFTER_MS
    ) {
      this.connection = "stale";
    }
  }

  markClosed(): void {
    this.connection = "closed";
    this.pending.clear();
  }

  markConnecting(): void {
    this.connection = "connecting";
  }

  private clearHistory(): void {
    this.costPlot.clear();
    this.actionPlot.clear();
    this.planningPlot.clear();
    this.events.length = 0;
  }
}
