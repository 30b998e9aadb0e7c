// Typed mirror of the service's JSON websocket schema. Everything the UI
// displays arrives through one of these three message shapes.

export const SCHEMA_VERSION = 1;

export interface RuntimeEvent {
  kind: string;
  sim_time: number;
  detail: string;
}

export interface TelemetryFrame {
  type: "telemetry";
  schema: number;
  seq: number;
  sim_time: number;
  task: string;
  qpos: number[];
  qvel: number[];
  action: number[];
  cost_terms: Record<string, number | null>;
  total_cost: number | null;
  risk: number;
  planner: string;
  planning_ms: number | null;
  iterations: number;
  generation: number;
  slowdown: number;
  paused: boolean;
  goal_index: number;
  succeeded: boolean;
  plan_times: number[];
  plan_values: number[][];
  best_objective: number | null;
  worst_objective: number | null;
  nominal_objective: number | null;
  events: RuntimeEvent[];
}

export interface Hello {
  type: "hello";
  schema: number;
  task: string;
  tasks: string[];
  planners: string[];
  planner: string;
  terms: { name: string; weight: number }[];
  risk: number;
  slowdown: number;
  nv: number;
  nu: number;
  control_lower: number[];
  control_upper: number[];
  goals: number[][];
}

export interface Ack {
  type: "ack";
  schema: number;
  id: number | string | null;
  status: "ok" | "error";
  command: string;
  detail: Record<string, unknown>;
}

export type ServerMessage = TelemetryFrame | Hello | Ack;

export type Command =
  | { type: "set_weight"; term: string; value: number }
  | { type: "set_risk"; value: number }
  | { type: "set_planner"; kind: string }
  | { type: "set_planner_setting"; name: string; value: number }
  | { type: "set_slowdown"; value: number }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "perturb"; impulse: number[] }
  | { type: "set_task"; name: string }
  | { type: "set_goal"; goal: number[] }
  | { type: "reset"; seed?: number };

export class ProtocolError extends Error {}

const MESSAGE_TYPES = new Set(["telemetry", "hello", "ack"]);

/** Parse one websocket text payload, rejecting anything off-schema. */
export function parseServerMessage(text: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    throw new ProtocolError("not valid JSON");
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new ProtocolError("message is not an object");
  }
  const msg = data as Record<string, unknown>;
  if (typeof msg.type !== "string" || !MESSAGE_TYPES.has(msg.type)) {
    throw new ProtocolError(`unknown message type ${String(msg.type)}`);
  }
  if (msg.schema !== SCHEMA_VERSION) {
    throw new ProtocolError(
      `schema ${String(msg.schema)}, this client speaks ${SCHEMA_VERSION}`,
    );
  }
  return msg as unknown as ServerMessage;
}

export function isTelemetry(m: ServerMessage): m is TelemetryFrame {
  return m.type === "telemetry";
}

export function isHello(m: ServerMessage): m is Hello {
  return m.type === "hello";
}

export function isAck(m: ServerMessage): m is Ack {
  return m.type === "ack";
}
