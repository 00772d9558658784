"""
Interactive-dynamics service
============================

Session-oriented server for poking pictures: each session pairs an image
with a spectral volume and runs one modal simulation loop; force events
arrive over a WebSocket and rendered frames stream back.

Protocol:
    POST   /sessions                multipart: image (PNG), volume (SPECVOL1),
                                    optional config (JSON text)
    POST   /sessions/{id}/config    JSON subset of the session config
    DELETE /sessions/{id}
    GET    /sessions/{id}/stream    WebSocket: inbound text events
                                    "t_ms kind x y fx fy"; outbound, per tick,
                                    one binary PNG frame followed by one text
                                    telemetry record "tick max_disp e_0 ... e_{K-1}"

All simulation state is owned by the stream loop; events are queued and
applied only at tick boundaries. Sessions are independent.
"""

import asyncio
import io as _io
import json
import secrets
import tempfile
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, File, Form, UploadFile, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response

from .errors import DataError
from .images import encode_png
from .io import read_spectral_volume
from .modal import DEFAULT_DAMPING, DEFAULT_MASS, OscillatorParams, SessionLoop, parse_event
from .render import RenderConfig, synthesize_frame
from .spectral import SpectralVolume, ifft_inverse


@dataclass
class SessionConfig:
    fps: float = 25.0
    zeta: float = DEFAULT_DAMPING
    mass: float = DEFAULT_MASS
    magnify: float = 1.0
    force_scale: float = 1.0
    realtime: bool = True
    pyramid_levels: int = 2

    def apply_updates(self, updates: dict) -> None:
        for key in ("fps", "zeta", "mass", "magnify", "force_scale"):
            if key in updates:
                setattr(self, key, float(updates[key]))
        if "realtime" in updates:
            self.realtime = bool(updates["realtime"])
        if "pyramid_levels" in updates:
            self.pyramid_levels = int(updates["pyramid_levels"])


@dataclass
class Session:
    image: np.ndarray
    volume: SpectralVolume
    config: SessionConfig
    weights: np.ndarray
    loop: SessionLoop = None
    closed: bool = False
    streaming: bool = False
    config_dirty: bool = False
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)


def _error(status: int, code: str, detail: str = "") -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def _splat_weights(volume: SpectralVolume) -> np.ndarray:
    # mean displacement magnitude over one synthesized cycle, the same
    # motion-derived weighting the offline renderer uses
    from .render import compute_weights

    tex = ifft_inverse(volume)
    return compute_weights(tex)


def create_app() -> FastAPI:
    app = FastAPI(title="specmotion interactive dynamics")
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    @app.post("/sessions")
    async def create_session(
        image: UploadFile = File(...),
        volume: UploadFile = File(...),
        config: str = Form("{}"),
    ):
        try:
            from PIL import Image

            img = np.asarray(
                Image.open(_io.BytesIO(await image.read())).convert("RGB"),
                dtype=np.float64,
            ) / 255.0
        except Exception as exc:
            return _error(400, "BAD_IMAGE", str(exc))
        try:
            with tempfile.NamedTemporaryFile(suffix=".specvol") as tmp:
                tmp.write(await volume.read())
                tmp.flush()
                vol = read_spectral_volume(tmp.name)
        except DataError as exc:
            return _error(400, "BAD_VOLUME", str(exc))
        if (vol.height, vol.width) != img.shape[:2]:
            return _error(
                400,
                "DIMENSION_MISMATCH",
                f"volume {vol.width}x{vol.height} vs image "
                f"{img.shape[1]}x{img.shape[0]}",
            )
        try:
            cfg = SessionConfig()
            cfg.apply_updates(json.loads(config) if config else {})
        except (ValueError, TypeError) as exc:
            return _error(400, "BAD_CONFIG", str(exc))
        session_id = secrets.token_hex(8)
        session = Session(
            image=img, volume=vol, config=cfg, weights=_splat_weights(vol)
        )
        session.loop = _make_loop(session)
        sessions[session_id] = session
        return JSONResponse(status_code=201, content={"session_id": session_id})

    @app.post("/sessions/{session_id}/config")
    async def update_config(session_id: str, updates: dict):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, "UNKNOWN_SESSION")
        async with session.lock:
            session.config.apply_updates(updates)
            session.config_dirty = True
        return {"ok": True, "config": vars(session.config)}

    @app.delete("/sessions/{session_id}")
    async def delete_session(session_id: str):
        session = sessions.pop(session_id, None)
        if session is None:
            return _error(404, "UNKNOWN_SESSION")
        session.closed = True
        return Response(status_code=204)

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str):
        session = sessions.get(session_id)
        if session is None:
            await ws.close(code=4404)
            return
        if session.streaming:
            await ws.close(code=4409)  # one stream per session
            return
        session.streaming = True
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()

        async def receiver():
            while True:
                try:
                    line = await ws.receive_text()
                except (WebSocketDisconnect, RuntimeError):
                    await queue.put(None)
                    return
                try:
                    _, ev = parse_event(line)
                    await queue.put(ev)
                except DataError:
                    # malformed events are ignored with a warning record
                    await queue.put(("warn", line))

        recv_task = asyncio.create_task(receiver())
        render_cfg = RenderConfig(pyramid_levels=session.config.pyramid_levels)
        try:
            while not session.closed:
                disconnected = False
                while not queue.empty():
                    item = queue.get_nowait()
                    if item is None:
                        disconnected = True
                        break
                    if isinstance(item, tuple):
                        await ws.send_text(f"warning malformed_event {item[1]!r}")
                        continue
                    session.loop.apply(item)
                if disconnected:
                    break
                if session.config_dirty:
                    async with session.lock:
                        session.loop = _make_loop(session, carry_from=session.loop)
                        render_cfg = RenderConfig(
                            pyramid_levels=session.config.pyramid_levels
                        )
                        session.config_dirty = False
                field_map = session.loop.tick() * session.config.magnify
                frame = synthesize_frame(
                    session.image, field_map, session.weights, render_cfg
                )
                await ws.send_bytes(encode_png(frame))
                max_disp = float(np.linalg.norm(field_map, axis=-1).max())
                energies = " ".join(f"{e:.6g}" for e in session.loop.energies())
                await ws.send_text(
                    f"{session.loop.tick_index} {max_disp:.6g} {energies}"
                )
                if session.config.realtime:
                    await asyncio.sleep(session.loop.tick_interval)
                else:
                    await asyncio.sleep(0)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            session.streaming = False
            recv_task.cancel()

    return app


def _make_loop(session: Session, carry_from: SessionLoop | None = None) -> SessionLoop:
    params = OscillatorParams.from_volume(
        session.volume, zeta=session.config.zeta, mass=session.config.mass
    )
    loop = SessionLoop(
        session.volume,
        params,
        output_fps=session.config.fps,
        force_scale=session.config.force_scale,
    )
    if carry_from is not None:
        # keep the oscillation going across config changes
        loop.state = carry_from.state
        if loop.state.dt != loop.tick_interval / loop._n_sub:
            from dataclasses import replace

            loop.state = replace(loop.state, dt=loop.tick_interval / loop._n_sub)
        loop.tick_index = carry_from.tick_index
        loop._drive = carry_from._drive
    return loop


app = create_app()
