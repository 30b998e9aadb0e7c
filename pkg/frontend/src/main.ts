// Cockpit entry point: builds the control panel from the server's hello,
// wires gestures, and renders scene + plots on the display refresh.

import { CockpitClient } from "./client.js";
import { impulseFromDrag } from "./gestures.js";
import { drawSingleSeries, drawTraceSet } from "./plots.js";
import { Ctx2D, drawScene } from "./scene.js";
import { SessionView, STALE_AFTER_MS } from "./session.js";

const SLIDER_THROTTLE_MS = 60;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function fmt(v: number | null | undefined, digits = 2): string {
  return v === null || v === undefined || !Number.isFinite(v)
    ? "--"
    : v.toFixed(digits);
}

export class ControlPanel {
  private signature = "";
  private activeControl: string | null = null;
  private lastSent = new Map<string, number>();

  constructor(
    private readonly root: HTMLElement,
    private readonly client: CockpitClient,
  ) {}

  /** Rebuild the panel when the task (and so the control set) changes. */
  sync(session: SessionView): void {
    const hello = session.hello;
    if (!hello) return;
    const sig =
      session.mirror.task + "|" + [...session.mirror.weights.keys()].join(",");
    if (sig !== this.signature) {
      this.signature = sig;
      this.build(session);
    }
    this.refreshValues(session);
  }

  private throttledSend(key: string, send: () => void): void {
    const now = performance.now();
    const last = this.lastSent.get(key) ?? -Infinity;
    if (now - last >= SLIDER_THROTTLE_MS) {
      this.lastSent.set(key, now);
      send();
    }
  }

  private build(session: SessionView): void {
    const hello = session.hello!;
    this.root.replaceChildren();

    const taskRow = el("div", "row");
    taskRow.append(el("label", "", "task"));
    const taskSelect = el("select");
    for (const name of hello.tasks) {
      const opt = el("option", "", name);
      opt.value = name;
      taskSelect.append(opt);
    }
    taskSelect.value = session.mirror.task;
    taskSelect.onchange = () =>
      this.client.send({ type: "set_task", name: taskSelect.value });
    taskRow.append(taskSelect);
    this.root.append(taskRow);

    const plannerRow = el("div", "row");
    plannerRow.append(el("label", "", "planner"));
    const plannerSelect = el("select");
    plannerSelect.id = "planner-select";
    for (const kind of hello.planners) {
      const opt = el("option", "", kind);
      opt.value = kind;
      plannerSelect.append(opt);
    }
    plannerSelect.value = session.mirror.planner;
    plannerSelect.onchange = () =>
      this.client.send({ type: "set_planner", kind: plannerSelect.value });
    plannerRow.append(plannerSelect);
    this.root.append(plannerRow);

    for (const [name, weight] of session.mirror.weights) {
      this.root.append(
        this.slider(`weight-${name}`, name, 0, Math.max(4 * weight, 1), weight, (v) =>
          this.throttledSend(name, () =>
            this.client.send({ type: "set_weight", term: name, value: v }),
          ),
        ),
      );
    }

    this.root.append(
      this.slider("risk", "risk", -2, 2, session.mirror.risk, (v) =>
        this.throttledSend("risk", () =>
          this.client.send({ type: "set_risk", value: v }),
        ),
      ),
      this.slider(
        "slowdown",
        "slowdown",
        1,
        20,
        session.mirror.slowdown,
        (v) =>
          this.throttledSend("slowdown", () =>
            this.client.send({ type: "set_slowdown", value: v }),
          ),
      ),
    );

    const buttons = el("div", "row buttons");
    const pauseBtn = el("button", "", "pause");
    pauseBtn.id = "pause-button";
    pauseBtn.onclick = () =>
      this.client.send({
        type: this.client.session.mirror.paused ? "resume" : "pause",
      });
    const resetBtn = el("button", "", "reset");
    resetBtn.onclick = () => this.client.send({ type: "reset" });
    buttons.append(pauseBtn, resetBtn);
    this.root.append(buttons);
  }

  private slider(
    id: string,
    label: string,
    min: number,
    max: number,
    value: number,
    onInput: (v: number) => void,
  ): HTMLElement {
    const row = el("div", "row");
    row.append(el("label", "", label));
    const input = el("input");
    input.type = "range";
    input.id = id;
    input.min = String(min);
    input.max = String(max);
    input.step = String((max - min) / 200);
    input.value = String(value);
    const readout = el("span", "value", value.toFixed(2));
    input.oninput = () => {
      readout.textContent = Number(input.value).toFixed(2);
      onInput(Number(input.value));
    };
    input.onpointerdown = () => (this.activeControl = id);
    input.onpointerup = () => (this.activeControl = null);
    row.append(input, readout);
    return row;
  }

  /** Snap controls to acknowledged values, except the one being dragged. */
  private refreshValues(session: SessionView): void {
    const set = (id: string, value: number) => {
      if (this.activeControl === id) return;
      const input = document.getElementById(id) as HTMLInputElement | null;
      if (input && Math.abs(Number(input.value) - value) > 1e-9) {
        input.value = String(value);
        const readout = input.nextElementSibling;
        if (readout) readout.textContent = value.toFixed(2);
      }
    };
    for (const [name, weight] of session.mirror.weights) {
      set(`weight-${name}`, weight);
    }
    set("risk", session.mirror.risk);
    set("slowdown", session.mirror.slowdown);
    const plannerSelect = document.getElementById(
      "planner-select",
    ) as HTMLSelectElement | null;
    if (plannerSelect && plannerSelect.value !== session.mirror.planner) {
      plannerSelect.value = session.mirror.planner;
    }
    const pauseBtn = document.getElementById("pause-button");
    if (pauseBtn) {
      pauseBtn.textContent = session.mirror.paused ? "resume" : "pause";
    }
  }
}

export function wirePerturbGesture(
  canvas: HTMLCanvasElement,
  client: CockpitClient,
): { draw: (ctx: Ctx2D) => void } {
  let start: [number, number] | null = null;
  let current: [number, number] | null = null;

  canvas.addEventListener("pointerdown", (ev) => {
    start = [ev.offsetX, ev.offsetY];
    current = start;
    try {
      canvas.setPointerCapture((ev as PointerEvent).pointerId);
    } catch {
      // non-pointer environments (tests) have no capture support
    }
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (start) current = [ev.offsetX, ev.offsetY];
  });
  canvas.addEventListener("pointerup", (ev) => {
    if (!start) return;
    const dx = ev.offsetX - start[0];
    const dy = ev.offsetY - start[1];
    start = null;
    current = null;
    const session = client.session;
    if (!session.hello || !session.frame) return;
    if (Math.hypot(dx, dy) < 6) return; // a click, not a drag
    const pxPerUnit = Math.min(canvas.width, canvas.height) / 4;
    const impulse = impulseFromDrag(
      session.frame.task,
      session.hello.nv,
      dx,
      dy,
      pxPerUnit,
    );
    client.send({ type: "perturb", impulse });
  });

  return {
    draw(ctx: Ctx2D) {
      if (!start || !current) return;
      ctx.strokeStyle = "#f7768e";
      ctx.lineWidth = 2;
      ctx.setLineDash([6, 4]);
      ctx.beginPath();
      ctx.moveTo(start[0], start[1]);
      ctx.lineTo(current[0], current[1]);
      ctx.stroke();
      ctx.setLineDash([]);
    },
  };
}

export function renderStatus(bar: HTMLElement, session: SessionView): void {
  const f = session.frame;
  const parts = [
    `sim ${fmt(f?.sim_time)}s`,
    `cost ${fmt(f?.total_cost, 3)}`,
    `plan ${fmt(f?.planning_ms, 1)}ms`,
    `iter ${f?.iterations ?? "--"}`,
    `rtt ${fmt(session.roundTripMs, 0)}ms`,
    `${session.mirror.planner}`,
  ];
  bar.textContent = parts.join("  |  ");
  if (f?.succeeded) bar.textContent += "  |  goal held";
  if (session.lastError) bar.textContent += `  |  ${session.lastError}`;
}

export function renderBanner(banner: HTMLElement, session: SessionView): void {
  if (session.connection === "live") {
    banner.hidden = true;
    return;
  }
  banner.hidden = false;
  banner.textContent =
    session.connection === "stale"
      ? "telemetry stalled: showing last received data"
      : session.connection === "closed"
        ? "disconnected: reconnecting..."
        : "connecting...";
}

export function startCockpit(): void {
  const scene = document.getElementById("scene") as HTMLCanvasElement;
  const plots = document.getElementById("plots") as HTMLCanvasElement;
  const panel = document.getElementById("panel") as HTMLElement;
  const status = document.getElementById("status") as HTMLElement;
  const banner = document.getElementById("banner") as HTMLElement;

  const wsUrl = location.origin.replace(/^http/, "ws") + "/ws";
  const client = new CockpitClient(wsUrl, (url) => new WebSocket(url));
  const controls = new ControlPanel(panel, client);
  const gesture = wirePerturbGesture(scene, client);
  client.connect();

  const sceneCtx = scene.getContext("2d") as unknown as Ctx2D;
  const plotCtx = plots.getContext("2d") as unknown as Ctx2D;

  function frame(): void {
    const session = client.session;
    session.refreshStaleness(Date.now());
    controls.sync(session);
    renderStatus(status, session);
    renderBanner(banner, session);
    if (session.frame && session.hello) {
      drawScene(
        sceneCtx,
        { width: scene.width, height: scene.height },
        session.frame,
        session.hello,
      );
      gesture.draw(sceneCtx);
      plotCtx.clearRect(0, 0, plots.width, plots.height);
      const w = plots.width;
      const third = Math.floor(plots.height / 3) - 8;
      drawTraceSet(
        plotCtx,
        { x: 4, y: 4, width: w - 8, height: third },
        session.costPlot,
        "cost terms",
      );
      drawTraceSet(
        plotCtx,
        { x: 4, y: third + 12, width: w - 8, height: third },
        session.actionPlot,
        "actions",
      );
      drawSingleSeries(
        plotCtx,
        { x: 4, y: 2 * third + 20, width: w - 8, height: third },
        session.planningPlot,
        "planning ms",
      );
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);

  // staleness ticks even when frames (and so renders) stop arriving
  setInterval(() => client.session.refreshStaleness(Date.now()), STALE_AFTER_MS / 2);
}

// Auto-start only inside a real page; tests import the pieces directly.
if (typeof document !== "undefined" && document.getElementById("scene")) {
  startCockpit();
}
