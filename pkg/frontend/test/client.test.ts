import { describe, expect, it } from "vitest";

import { CockpitClient, SocketLike } from "../src/client.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev: any) => void) | null = null;
  onmessage: ((ev: any) => void) | null = null;
  onclose: ((ev: any) => void) | null = null;
  onerror: ((ev: any) => void) | null = null;

  send(data: string) {
    this.sent.push(data);
  }
  close() {
    this.closed = true;
    this.onclose?.({});
  }
  receive(payload: unknown) {
    this.onmessage?.({ data: JSON.stringify(payload) });
  }
}

function makeClient() {
  const sockets: FakeSocket[] = [];
  const timers: (() => void)[] = [];
  const client = new CockpitClient(
    "ws://test/ws",
    () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    undefined,
    {
      now: () => 42,
      setTimer: (fn) => {
        timers.push(fn);
        return 0;
      },
    },
  );
  return { client, sockets, timers };
}

const HELLO = {
  type: "hello",
  schema: 1,
  task: "pendulum-swingup",
  tasks: ["pendulum-swingup"],
  planners: ["sampling"],
  planner: "sampling",
  terms: [{ name: "upright", weight: 10 }],
  risk: 0,
  slowdown: 1,
  nv: 1,
  nu: 1,
  control_lower: [-2.5],
  control_upper: [2.5],
  goals: [],
};

describe("CockpitClient", () => {
  it("stamps outgoing commands with increasing ids", () => {
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].receive(HELLO);
    const id1 = client.send({ type: "pause" });
    const id2 = client.send({ type: "resume" });
    expect(id2).toBe(id1 + 1);
    const sent = sockets[0].sent.map((s) => JSON.parse(s));
    expect(sent[0]).toEqual({ type: "pause", id: id1 });
    expect(sent[1]).toEqual({ type: "resume", id: id2 });
    expect(client.session.pendingCount).toBe(2);
  });

  it("routes messages into the session and ignores junk", () => {
    const { client, sockets } = makeClient();
    client.connect();
    const sock = sockets[0];
    sock.receive(HELLO);
    expect(client.session.mirror.weights.get("upright")).toBe(10);
    sock.onmessage?.({ data: "}{ not json" });
    sock.receive({ type: "mystery", schema: 1 });
    expect(client.session.connection).toBe("connecting"); // unharmed
    const id = client.send({ type: "set_risk", value: 0.5 });
    sock.receive({
      type: "ack",
      schema: 1,
      id,
      status: "ok",
      command: "set_risk",
      detail: { value: 0.5 },
    });
    expect(client.session.mirror.risk).toBe(0.5);
    expect(client.session.pendingCount).toBe(0);
  });

  it("schedules a reconnect when the server drops the socket", () => {
    const { client, sockets, timers } = makeClient();
    client.connect();
    sockets[0].onclose?.({});
    expect(client.session.connection).toBe("closed");
    expect(timers.length).toBe(1);
    timers[0]();
    expect(sockets.length).toBe(2);
    expect(client.session.connection).toBe("connecting");
  });

  it("does not reconnect after an intentional close", () => {
    const { client, sockets, timers } = makeClient();
    client.connect();
    client.close();
    expect(sockets[0].closed).toBe(true);
    expect(timers.length).toBe(0);
    expect(client.session.connection).toBe("closed");
  });

  it("refuses to send while disconnected", () => {
    const { client } = makeClient();
    expect(() => client.send({ type: "pause" })).toThrow(/not connected/);
  });
});
