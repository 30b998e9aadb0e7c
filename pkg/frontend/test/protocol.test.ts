import { describe, expect, it } from "vitest";

import {
  isAck,
  isHello,
  isTelemetry,
  parseServerMessage,
  ProtocolError,
  SCHEMA_VERSION,
} from "../src/protocol.js";

// Pinned copies of real server output, so schema drift fails loudly here.
const HELLO = JSON.stringify({
  type: "hello",
  schema: 1,
  task: "pendulum-swingup",
  tasks: ["acrobot-swingup", "cartpole-swingup", "particle-waypoints", "pendulum-swingup"],
  planners: ["sampling", "gradient", "ilqg"],
  planner: "sampling",
  terms: [
    { name: "upright", weight: 10.0 },
    { name: "velocity", weight: 0.5 },
    { name: "effort", weight: 0.05 },
  ],
  risk: 0.0,
  slowdown: 1.0,
  nv: 1,
  nu: 1,
  control_lower: [-2.5],
  control_upper: [2.5],
  goals: [],
});

const TELEMETRY = JSON.stringify({
  type: "telemetry",
  schema: 1,
  seq: 7,
  sim_time: 0.42,
  task: "pendulum-swingup",
  qpos: [0.3],
  qvel: [-1.1],
  action: [2.5],
  cost_terms: { upright: 19.2, velocity: 0.6, effort: 0.31 },
  total_cost: 20.11,
  risk: 0.0,
  planner: "sampling",
  planning_ms: 2.4,
  iterations: 41,
  generation: 41,
  slowdown: 1.0,
  paused: false,
  goal_index: 0,
  succeeded: false,
  plan_times: [0.4, 0.5],
  plan_values: [[1.0], [0.5]],
  best_objective: 812.2,
  worst_objective: 997.0,
  nominal_objective: 820.4,
  events: [{ kind: "goal_transition", sim_time: 0.4, detail: "1" }],
});

const ACK = JSON.stringify({
  type: "ack",
  schema: 1,
  id: 3,
  status: "ok",
  command: "set_weight",
  detail: { term: "upright", value: 4.0 },
});

describe("parseServerMessage", () => {
  it("accepts the three known message shapes", () => {
    const hello = parseServerMessage(HELLO);
    const frame = parseServerMessage(TELEMETRY);
    const ack = parseServerMessage(ACK);
    expect(isHello(hello)).toBe(true);
    expect(isTelemetry(frame)).toBe(true);
    expect(isAck(ack)).toBe(true);
    if (isHello(hello)) {
      expect(hello.terms.map((t) => t.name)).toEqual([
        "upright",
        "velocity",
        "effort",
      ]);
      expect(hello.control_upper).toEqual([2.5]);
    }
    if (isTelemetry(frame)) {
      expect(frame.cost_terms.upright).toBeCloseTo(19.2);
      expect(frame.events[0].kind).toBe("goal_transition");
    }
    if (isAck(ack)) {
      expect(ack.status).toBe("ok");
      expect(ack.detail.term).toBe("upright");
    }
  });

  it("rejects junk, unknown types, and schema mismatches", () => {
    expect(() => parseServerMessage("{not json")).toThrow(ProtocolError);
    expect(() => parseServerMessage('"just a string"')).toThrow(ProtocolError);
    expect(() => parseServerMessage('{"type": "surprise", "schema": 1}')).toThrow(
      ProtocolError,
    );
    expect(() =>
      parseServerMessage(
        JSON.stringify({ type: "telemetry", schema: SCHEMA_VERSION + 1 }),
      ),
    ).toThrow(/schema/);
  });

  it("null-valued floats survive parsing", () => {
    const withNulls = JSON.parse(TELEMETRY);
    withNulls.total_cost = null;
    withNulls.planning_ms = null;
    const frame = parseServerMessage(JSON.stringify(withNulls));
    if (isTelemetry(frame)) {
      expect(frame.total_cost).toBeNull();
      expect(frame.planning_ms).toBeNull();
    }
  });
});
