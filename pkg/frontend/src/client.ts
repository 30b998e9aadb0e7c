// Websocket session driver: parses server messages into the SessionView,
// stamps outgoing commands with ids, and reconnects with backoff. The
// socket constructor is injected so tests (and the node-based round-trip
// check) can supply their own implementation.

import { Command, isAck, isHello, isTelemetry, parseServerMessage } from "./protocol.js";
import { SessionView } from "./session.js";

/** The few members shared by browser WebSocket and the npm ws package.
 * Handler params are any because the two environments disagree on the
 * event types; this client only ever reads `.data`. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  reconnectDelayMs?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class CockpitClient {
  readonly session: SessionView;
  private socket: SocketLike | null = null;
  private nextId = 1;
  private closedByUser = false;
  private readonly reconnectDelayMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;

  /** Called after every state-changing message, for render scheduling. */
  onUpdate: (() => void) | null = null;

  constructor(
    private readonly url: string,
    private readonly makeSocket: SocketFactory,
    session?: SessionView,
    options: ClientOptions = {},
  ) {
    this.session = session ?? new SessionView();
    this.reconnectDelayMs = options.reconnectDelayMs ?? 1000;
    this.now = options.now ?? (() => Date.now());
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.closedByUser = false;
    this.session.markConnecting();
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onmessage = (ev) => this.handleMessage(String(ev.data));
    sock.onclose = () => this.handleClose();
    sock.onerror = () => {
      // close follows; nothing to do beyond letting onclose reconnect
    };
    this.notify();
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
    this.session.markClosed();
    this.notify();
  }

  /** Send a command; returns the id it was stamped with. */
  send(command: Command): number {
    if (!this.socket) {
      throw new Error("not connected");
    }
    const id = this.nextId++;
    this.session.noteSent(id, command, this.now());
    this.socket.send(JSON.stringify({ ...command, id }));
    return id;
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  private handleMessage(text: string): void {
    let message;
    try {
      message = parseServerMessage(text);
    } catch {
      return; // foreign or corrupt payload: ignore, keep the session
    }
    const wall = this.now();
    if (isHello(message)) {
      this.session.applyHello(message);
    } else if (isTelemetry(message)) {
      this.session.applyTelemetry(message, wall);
    } else if (isAck(message)) {
      this.session.applyAck(message, wall);
    }
    this.notify();
  }

  private handleClose(): void {
    this.socket = null;
    if (this.closedByUser) return;
    this.session.markClosed();
    this.notify();
    this.setTimer(() => {
      if (!this.closedByUser) this.connect();
    }, this.reconnectDelayMs);
  }

  private notify(): void {
    this.onUpdate?.();
  }
}
