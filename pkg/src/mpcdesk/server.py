"""WebSocket gateway: broadcasts telemetry frames at a fixed wall rate and
applies client commands to the running agent.

Clients connect to ``/ws``, receive a hello message describing the live
task, then a stream of telemetry frames. Commands are JSON objects; every
command gets an ack (or an error reply) carrying the authoritative
post-apply values. Slow clients lose old frames, never the agent's time.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import wire
from .agent import Runtime
from .tasks import get_task

CLIENT_QUEUE_SIZE = 32


class Broadcaster:
    """Fan-out of encoded messages to per-client queues, drop-oldest."""

    def __init__(self):
        self._queues: dict[int, asyncio.Queue] = {}
        self._next_id = 0

    def register(self) -> tuple[int, asyncio.Queue]:
        self._next_id += 1
        q: asyncio.Queue = asyncio.Queue(maxsize=CLIENT_QUEUE_SIZE)
        self._queues[self._next_id] = q
        return self._next_id, q

    def unregister(self, client_id: int) -> None:
        self._queues.pop(client_id, None)

    @staticmethod
    def _put_drop_oldest(q: asyncio.Queue, text: str) -> None:
        while True:
            try:
                q.put_nowait(text)
                return
            except asyncio.QueueFull:
                with contextlib.suppress(asyncio.QueueEmpty):
                    q.get_nowait()

    def offer(self, text: str) -> None:
        for q in self._queues.values():
            self._put_drop_oldest(q, text)

    def send_to(self, client_id: int, text: str) -> None:
        q = self._queues.get(client_id)
        if q is not None:
            self._put_drop_oldest(q, text)

    @property
    def client_count(self) -> int:
        return len(self._queues)


async def _broadcast_loop(runtime: Runtime, broadcaster: Broadcaster, hz: float):
    """Emit one frame per tick while sim time is moving; frames within an
    episode are strictly ordered by sim_time (a reset restarts the order)."""
    seq = 0
    last_sim = None
    while True:
        await asyncio.sleep(1.0 / hz)
        if broadcaster.client_count == 0:
            continue
        sim_time = runtime.clock.sim_time
        if last_sim is not None and sim_time == last_sim:
            continue
        seq += 1
        frame = wire.frame_from_runtime(runtime, seq)
        broadcaster.offer(wire.encode_frame(frame))
        last_sim = sim_time


def build_app(
    runtime: Runtime,
    frame_hz: float = 30.0,
    autostart: bool = True,
    static_dir: str | None = None,
) -> FastAPI:
    broadcaster = Broadcaster()
    command_lock = asyncio.Lock()

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        if autostart:
            runtime.start()
        task = asyncio.create_task(_broadcast_loop(runtime, broadcaster, frame_hz))
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
            if autostart:
                runtime.stop()

    app = FastAPI(title="mpcdesk", lifespan=lifespan)
    app.state.runtime = runtime
    app.state.broadcaster = broadcaster

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        client_id, queue = broadcaster.register()
        await websocket.send_text(wire.hello_message(runtime))

        async def sender():
            while True:
                text = await queue.get()
                await websocket.send_text(text)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    data = json.loads(raw)
                except json.JSONDecodeError:
                    broadcaster.send_to(
                        client_id,
                        wire.encode_ack(None, "error", "unknown",
                                        {"message": "malformed JSON"}),
                    )
                    continue
                cmd_id = data.get("id") if isinstance(data, dict) else None
                ctype = data.get("type") if isinstance(data, dict) else None
                try:
                    # one command fully applied before the next is read
                    async with command_lock:
                        detail = await asyncio.to_thread(
                            wire.apply_command, runtime, data
                        )
                except wire.CommandError as exc:
                    reply = wire.encode_ack(
                        cmd_id, "error", str(ctype), {"message": str(exc)}
                    )
                else:
                    reply = wire.encode_ack(cmd_id, "ok", str(ctype), detail)
                broadcaster.send_to(client_id, reply)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await send_task
            broadcaster.unregister(client_id)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def default_static_dir() -> str | None:
    """The built browser cockpit, when present next to this repo checkout."""
    here = Path(__file__).resolve()
    for parent in here.parents:
        candidate = parent / "frontend" / "dist"
        if candidate.is_dir():
            return str(candidate)
    return None


def serve(
    task_name: str,
    planner_kind: str = "sampling",
    host: str = "127.0.0.1",
    port: int = 8700,
    slowdown: float = 1.0,
    frame_hz: float = 30.0,
) -> None:
    import uvicorn

    runtime = Runtime(get_task(task_name), planner_kind, slowdown=slowdown)
    app = build_app(runtime, frame_hz=frame_hz, static_dir=default_static_dir())
    uvicorn.run(app, host=host, port=port, log_level="warning")
