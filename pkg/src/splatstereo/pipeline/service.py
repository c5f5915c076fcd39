"""Streaming render service for interactive viewers.

WebSocket protocol (one session per connection):
  client -> server, JSON text:
      {"type": "pose", "R": [9 floats, row-major world->camera],
       "t": [3 floats], "fov_deg": float, "width": int, "height": int,
       "frame": int}
      {"type": "ping"}
  server -> client, binary frame message:
      4-byte big-endian header length, then a JSON header
      {"type": "frame", "frame": int, "t_src_ms": float,
       "t_render_ms": float, "encoding": "jpeg", ...}, then image bytes.
  Errors are JSON text {"type": "error", "message": ...}; the connection
  survives malformed messages.

Pose updates land in a single-slot mailbox (last writer wins) consumed by
one render worker per client, so at most one frame is ever in flight and
a pose flood cannot grow any queue.
"""

import asyncio
import json
import logging
import struct
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from ..errors import SplatStereoError
from ..geometry.camera import CameraIntrinsics, CameraPose
from ..imgio import encode_jpeg, encode_png
from .dataset import SceneDataset, load_dataset
from .session import RenderRequest, SessionState, render_novel_view

logger = logging.getLogger(__name__)


def intrinsics_from_fov(fov_deg: float, width: int, height: int) -> CameraIntrinsics:
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2.0)
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def parse_pose_message(msg: dict) -> tuple[RenderRequest, str]:
    """Validate a pose message into a RenderRequest (+ encoding)."""
    R = np.asarray(msg["R"], dtype=np.float64).reshape(3, 3)
    t = np.asarray(msg["t"], dtype=np.float64).reshape(3)
    pose = CameraPose(rotation=R, translation=t)
    width = int(msg["width"])
    height = int(msg["height"])
    if width < 8 or height < 8 or width > 4096 or height > 4096:
        raise SplatStereoError(f"unreasonable output size {width}x{height}")
    intr = intrinsics_from_fov(float(msg["fov_deg"]), width, height)
    req = RenderRequest(frame=int(msg.get("frame", 0)), intrinsics=intr, pose=pose)
    return req, str(msg.get("encoding", "jpeg"))


class _Mailbox:
    """Single-slot last-writer-wins pose buffer."""

    def __init__(self):
        self._slot = None
        self._event = asyncio.Event()
        self.coalesced = 0

    def put(self, item) -> None:
        if self._slot is not None:
            self.coalesced += 1
        self._slot = item
        self._event.set()

    @property
    def pending(self) -> int:
        return 0 if self._slot is None else 1

    async def take(self):
        await self._event.wait()
        item = self._slot
        self._slot = None
        self._event.clear()
        return item


def create_app(dataset: SceneDataset, session_factory=None, static_dir=None) -> FastAPI:
    app = FastAPI(title="splatstereo render service")
    app.state.dataset = dataset
    app.state.session_factory = session_factory or SessionState
    app.state.clients = 0

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "frames": len(dataset.frames), "cameras": dataset.rig.camera_ids}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = app.state.session_factory()
        mailbox = _Mailbox()
        app.state.clients += 1
        loop = asyncio.get_running_loop()
        seq = 0

        async def render_worker():
            nonlocal seq
            while True:
                req, encoding = await mailbox.take()
                coalesced = mailbox.coalesced
                mailbox.coalesced = 0

                def job():
                    frame, _, tm = render_novel_view(dataset, req, session)
                    color = np.asarray(frame.color, dtype=np.float64)
                    payload = encode_png(color) if encoding == "png" else encode_jpeg(color)
                    return tm, payload

                try:
                    tm, payload = await loop.run_in_executor(None, job)
                except SplatStereoError as exc:
                    await ws.send_text(json.dumps({"type": "error", "message": str(exc)}))
                    continue
                seq += 1
                header = {
                    "type": "frame",
                    "frame": req.frame,
                    "t_src_ms": tm["t_src_ms"],
                    "t_render_ms": tm["t_render_ms"],
                    "encoding": encoding,
                    "width": req.intrinsics.width,
                    "height": req.intrinsics.height,
                    "pair": tm["pair"],
                    "gaussians": tm["gaussians"],
                    "seq": seq,
                    "coalesced": coalesced,
                    "pending": mailbox.pending,
                }
                head = json.dumps(header).encode("utf-8")
                await ws.send_bytes(struct.pack(">I", len(head)) + head + payload)

        worker = asyncio.create_task(render_worker())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                    mtype = msg.get("type")
                    if mtype == "ping":
                        await ws.send_text(json.dumps({"type": "pong", "pending": mailbox.pending}))
                    elif mtype == "pose":
                        req, encoding = parse_pose_message(msg)
                        mailbox.put((req, encoding))
                    else:
                        raise SplatStereoError(f"unknown message type {mtype!r}")
                except (KeyError, ValueError, TypeError, SplatStereoError) as exc:
                    await ws.send_text(json.dumps({"type": "error", "message": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            worker.cancel()
            app.state.clients -= 1

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="viewer")
    return app


def serve(dataset_or_root, bind: str = "127.0.0.1:8765", static_dir=None, session_factory=None) -> None:
    """Run the render service until interrupted."""
    import uvicorn

    dataset = dataset_or_root if isinstance(dataset_or_root, SceneDataset) else load_dataset(dataset_or_root)
    host, _, port = bind.partition(":")
    app = create_app(dataset, session_factory=session_factory, static_dir=static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8765), log_level="warning")
