"""HTTP facade for the designer UI: layout CRUD plus live typing sessions.

Layouts persist as JSON files in a directory (the key-mapping database);
sessions are in-memory with an idle TTL. Event polling is cursor-based and
append-only: polling with ``since`` never re-delivers or skips events.
"""

from __future__ import annotations

import re
import threading
import time
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import config as cfg
from .errors import (
    AmbiguousPolarityError,
    DomainError,
    FormatError,
    IllConditionedAnchorsError,
    InsufficientDataError,
)
from .evaluate import build_sim_fingerprint
from .keymap import KeyLayout, calculator_layout, validate_layout
from .session import LiveSession

SESSION_TTL_S = 600.0
_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class LayoutStore:
    """Directory of layout JSON files; writes are serialized."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()

    def _path(self, layout_id: str) -> Path:
        if not _ID_RE.match(layout_id):
            raise DomainError(f"bad layout id {layout_id!r}")
        return self.root / f"{layout_id}.json"

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def get(self, layout_id: str) -> KeyLayout | None:
        path = self._path(layout_id)
        if not path.exists():
            return None
        return KeyLayout.load(path)

    def put(self, layout: KeyLayout) -> None:
        with self.lock:
            layout.save(self._path(layout.layout_id))

    def delete(self, layout_id: str) -> bool:
        with self.lock:
            path = self._path(layout_id)
            if not path.exists():
                return False
            path.unlink()
            return True


def _layout_or_422(body: dict) -> KeyLayout:
    try:
        layout = KeyLayout.from_dict(body)
    except FormatError as exc:
        raise HTTPException(422, detail={"violations": [
            {"kind": "format", "message": str(exc)}]}) from exc
    violations = validate_layout(layout)
    blocking = [v for v in violations if v.kind != "missing_reference"]
    if blocking:
        raise HTTPException(422, detail={"violations": [
            {"kind": v.kind, "message": v.message, "key": v.key, "cell": v.cell}
            for v in blocking]})
    return layout


def create_app(layout_dir="layouts", config_path: str | None = None, seed: int = 0,
               static_dir: str | None = None) -> FastAPI:
    """Build the service around one base scenario and its factory fingerprint."""
    scenario = cfg.load_base_config(config_path)
    factory_fp, factory_silence = build_sim_fingerprint(scenario, seed=seed)
    factory_fp.prewarm()  # sessions share it across request threads
    store = LayoutStore(layout_dir)
    if store.get("calculator") is None:
        store.put(calculator_layout(scenario.board.shape, origin_col=4))

    app = FastAPI(title="magkey service")
    sessions: dict[str, LiveSession] = {}
    sessions_lock = threading.Lock()

    def purge_sessions() -> None:
        now = time.monotonic()
        with sessions_lock:
            stale = [sid for sid, s in sessions.items()
                     if now - s.last_access_wall > SESSION_TTL_S]
            for sid in stale:
                del sessions[sid]

    def get_session(sid: str) -> LiveSession:
        purge_sessions()
        s = sessions.get(sid)
        if s is None:
            raise HTTPException(404, detail=f"unknown session {sid!r}")
        s.touch()
        return s

    @app.exception_handler(DomainError)
    async def _domain_error(request, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(InsufficientDataError)
    async def _insufficient(request, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(AmbiguousPolarityError)
    async def _ambiguous(request, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(IllConditionedAnchorsError)
    async def _anchors(request, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.get("/board")
    def get_board():
        b = scenario.board
        return {
            "rows": b.rows, "cols": b.cols, "cell_size": b.cell_size,
            "width": b.width, "height": b.height,
            "sensor_pos": [float(v) for v in b.sensor_pos],
            "magnet_height": b.magnet_height,
        }

    # -- layouts -----------------------------------------------------------

    @app.get("/layouts")
    def list_layouts():
        return {"layouts": store.ids()}

    @app.post("/layouts", status_code=201)
    def create_layout(body: dict = Body(...)):
        layout = _layout_or_422(body)
        if store.get(layout.layout_id) is not None:
            raise HTTPException(409, detail=f"layout {layout.layout_id!r} already exists")
        store.put(layout)
        return layout.to_dict()

    @app.get("/layouts/{layout_id}")
    def get_layout(layout_id: str):
        layout = store.get(layout_id)
        if layout is None:
            raise HTTPException(404, detail=f"unknown layout {layout_id!r}")
        return layout.to_dict()

    @app.put("/layouts/{layout_id}")
    def put_layout(layout_id: str, body: dict = Body(...)):
        body = dict(body)
        body.setdefault("id", layout_id)
        if body["id"] != layout_id:
            raise HTTPException(422, detail={"violations": [
                {"kind": "format", "message": "body id does not match URL id"}]})
        layout = _layout_or_422(body)
        store.put(layout)
        return layout.to_dict()

    @app.delete("/layouts/{layout_id}", status_code=204)
    def delete_layout(layout_id: str):
        if not store.delete(layout_id):
            raise HTTPException(404, detail=f"unknown layout {layout_id!r}")

    # -- sessions ----------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(default={})):
        purge_sessions()
        layout = None
        if body.get("layout"):
            layout = store.get(body["layout"])
            if layout is None:
                raise HTTPException(404, detail=f"unknown layout {body['layout']!r}")
            if layout.grid != scenario.board.shape:
                raise HTTPException(422, detail={"violations": [
                    {"kind": "format", "message": "layout grid does not match board"}]})
        magnet = scenario.magnet
        if body.get("magnet_scale"):
            magnet = magnet.scaled(float(body["magnet_scale"]))
        if body.get("flip_polarity"):
            magnet = magnet.flipped()
        env = scenario.env
        if body.get("noise_sigma") is not None:
            env = env.with_noise(float(body["noise_sigma"]))
        sim = cfg.SimScenario(scenario.board, env, magnet)
        session = LiveSession(
            sim, factory_fp, layout=layout,
            seed=int(body.get("seed", 0)),
            auto_silence=bool(body.get("auto_silence", True)),
        )
        with sessions_lock:
            sessions[session.id] = session
        return {"id": session.id, "state": session.state()}

    @app.get("/sessions/{sid}")
    def session_state(sid: str):
        s = get_session(sid)
        with s.lock:
            s.advance_wall()
            return s.state()

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        purge_sessions()
        with sessions_lock:
            if sid not in sessions:
                raise HTTPException(404, detail=f"unknown session {sid!r}")
            del sessions[sid]

    @app.post("/sessions/{sid}/magnet")
    def set_magnet(sid: str, body: dict = Body(...)):
        s = get_session(sid)
        with s.lock:
            if body.get("absent"):
                s.set_magnet(absent=True,
                             settle_s=float(body.get("settle_s", 0.0)),
                             transition_s=float(body.get("transition_s", cfg.LIFT_TRANSITION_S)))
            else:
                pos = body.get("pos")
                if not pos or len(pos) != 2:
                    raise HTTPException(422, detail={"violations": [
                        {"kind": "format", "message": "need pos [x, y] or absent true"}]})
                s.set_magnet((float(pos[0]), float(pos[1])),
                             settle_s=float(body.get("settle_s", 0.0)),
                             transition_s=float(body.get("transition_s", cfg.TRANSITION_S)))
            return {"clock": s.clock, "magnet": s.state()["magnet"]}

    @app.get("/sessions/{sid}/events")
    def poll_events(sid: str, since: int = Query(0, ge=0)):
        s = get_session(sid)
        with s.lock:
            events, next_since = s.poll_events(since)
            return {"events": events, "next_since": next_since, "clock": s.clock}

    @app.post("/sessions/{sid}/calibrate")
    def calibrate(sid: str, body: dict = Body(...)):
        s = get_session(sid)
        step = body.get("step")
        with s.lock:
            if step == "silence":
                return s.calibrate_silence(float(body.get("duration_s", cfg.SILENCE_S)))
            if step == "polarity":
                cell = body.get("cell")
                return s.calibrate_polarity(None if cell is None else int(cell),
                                            float(body.get("duration_s", 1.0)))
            if step == "anchors":
                cells = body.get("cells")
                if not cells:
                    from .regen import default_anchor_cells
                    cells = list(default_anchor_cells(factory_fp))
                return s.calibrate_anchors(cells, float(body.get("duration_s", cfg.ANCHOR_S)))
        raise HTTPException(422, detail={"violations": [
            {"kind": "format", "message": f"unknown calibration step {step!r}"}]})

    if static_dir and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
