"""Click-to-navigate teleoperation backend.

Owns live sessions: a 10 Hz tick loop advances the follower in 50 Hz
sub-steps, broadcasts JSON state frames over a per-session WebSocket, and
accepts clicked goals that trigger an asynchronous field rebuild.  The agent
holds still from the tick a goal is accepted until the rebuilt field is
swapped in atomically, and every session keeps a command/swap log so the
trajectory can be replayed headlessly, bit for bit.

HTTP surface (all payloads carry ``proto: 1``):
  POST /session                  {"manifest": {...}} or {"gen": {seed, difficulty}}
  POST /session/{id}/goal        {"x": float, "y": float}
  GET  /session/{id}/scene       manifest + projected blocked mask
  GET  /session/{id}/log         command log + per-tick history (replay/debug)
  POST /session/{id}/debug/teleport   {"x": float, "y": float} (test hook)
  WS   /session/{id}/stream      state/ack/error frames at 10 Hz
"""

from __future__ import annotations

import asyncio
import itertools
import json
from contextlib import asynccontextmanager
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse

from .config import RunConfig
from .errors import FieldNavError, SceneRejectedError
from .field import GuidanceField, build_field
from .scene import (
    SceneManifest,
    certify_traversable,
    erode_walkable,
    generate_scene,
    manifest_to_grid,
    mask_cell_centers,
)
from .sim import (
    AgentState,
    check_collision,
    derive_parts,
    query_parts,
    step_follower,
)

PROTO_VERSION = 1
TICK_SECONDS = 0.1
SUBSTEPS = 5
SUBSTEP_DT = 0.02
GOAL_SNAP_RADIUS = 0.3
REACH_RADIUS = 0.1


@dataclass
class GoalEvent:
    tick_issued: int
    goal: np.ndarray
    swap_tick: int | None = None


@dataclass
class Session:
    session_id: str
    manifest: SceneManifest
    grid: object
    model: object
    fld: GuidanceField
    state: AgentState
    goal: np.ndarray
    walk_mask: np.ndarray
    walk_centers: np.ndarray
    status: str = "idle"
    tick: int = 0
    events: list[GoalEvent] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    subscribers: list[asyncio.Queue] = field(default_factory=list)
    commands: list[dict] = field(default_factory=list)
    pending: GoalEvent | None = None
    pending_future: object = None
    task: asyncio.Task | None = None
    last_queries: list | None = None
    frozen: bool = False


def _state_snapshot(state: AgentState) -> dict:
    return {
        "root_xy": state.root_xy.tolist(),
        "heading": state.heading.tolist(),
        "height_scale": state.height_scale,
        "lean": state.lateral_lean,
        "t": state.t,
    }


def _frame(session: Session) -> dict:
    if session.last_queries is None:
        parts = derive_parts(session.model, session.state)
        session.last_queries = query_parts(session.fld, parts)
    return {
        "type": "state",
        "proto": PROTO_VERSION,
        "tick": session.tick,
        "t": session.state.t,
        "agent": {
            "xy": session.state.root_xy.tolist(),
            "height_scale": session.state.height_scale,
            "lean": session.state.lateral_lean,
        },
        "parts": [
            {"xyz": q.part.position.tolist(), "f_h": q.vector.tolist()}
            for q in session.last_queries
        ],
        "goal": session.goal.tolist(),
        "status": session.status,
    }


class SessionManager:
    def __init__(self, cfg: RunConfig, default_manifest: SceneManifest | None = None):
        self.cfg = cfg
        self.default_manifest = default_manifest
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)

    # -- lifecycle ---------------------------------------------------------

    def start_session(self, manifest: SceneManifest) -> Session:
        grid = manifest_to_grid(manifest)
        scene_cfg = self.cfg.scene
        agent = self.cfg.agent
        if not certify_traversable(
            grid, manifest.start, manifest.goal, agent.clearance_radius
        ):
            raise SceneRejectedError("scene is not certifiably traversable")
        fld = build_field(grid, manifest.goal, self.cfg.field_params)
        mask = erode_walkable(
            grid, agent.clearance_radius + scene_cfg.resolution, scene_cfg.stand_band
        )
        to_goal = manifest.goal[:2] - manifest.start[:2]
        heading = to_goal if np.linalg.norm(to_goal) > 1e-12 else np.array([1.0, 0.0])
        session = Session(
            session_id=f"s{next(self._ids)}",
            manifest=manifest,
            grid=grid,
            model=agent,
            fld=fld,
            state=AgentState(root_xy=manifest.start[:2].copy(), heading=heading),
            goal=manifest.goal.copy(),
            walk_mask=mask,
            walk_centers=mask_cell_centers(mask, manifest.grid_spec()),
        )
        session.history.append(
            {"tick": -1, "status": session.status, **_state_snapshot(session.state)}
        )
        self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return session

    # -- goal handling -----------------------------------------------------

    def snap_goal(self, session: Session, x: float, y: float) -> np.ndarray:
        room = np.asarray(session.manifest.room)
        if not (0.0 <= x <= room[0] and 0.0 <= y <= room[1]):
            raise FieldNavError(f"click ({x}, {y}) outside the room")
        if session.walk_centers.shape[0] == 0:
            raise FieldNavError("no walkable cells in this scene")
        d = np.linalg.norm(session.walk_centers - np.array([x, y]), axis=1)
        nearest = int(np.argmin(d))
        if d[nearest] > GOAL_SNAP_RADIUS:
            raise FieldNavError(
                f"no free walkable cell within {GOAL_SNAP_RADIUS} m of the click"
            )
        cx, cy = session.walk_centers[nearest]
        return np.array([cx, cy, self.cfg.scene.start_height])

    # -- tick loop ---------------------------------------------------------

    async def _broadcast(self, session: Session, message: dict) -> None:
        for queue in list(session.subscribers):
            try:
                queue.put_nowait(message)
            except asyncio.QueueFull:
                pass

    def _advance_motion(self, session: Session) -> None:
        model = session.model
        for _ in range(SUBSTEPS):
            parts = derive_parts(model, session.state)
            queries = query_parts(session.fld, parts)
            session.last_queries = queries
            if check_collision(session.fld, parts):
                session.status = "collided"
                return
            dist = float(np.linalg.norm(session.state.root_xy - session.goal[:2]))
            if dist <= REACH_RADIUS:
                session.status = "reached"
                return
            session.state = step_follower(
                session.fld, model, session.state, SUBSTEP_DT, queries
            )

    async def tick_loop(self, session: Session) -> None:
        loop = asyncio.get_running_loop()
        try:
            while not session.frozen:
                await asyncio.sleep(TICK_SECONDS)
                # Drain queued commands; only the latest goal stays pending.
                commands, session.commands = session.commands, []
                for cmd in commands:
                    if cmd["kind"] == "goal":
                        event = GoalEvent(tick_issued=session.tick, goal=cmd["goal"])
                        session.events.append(event)
                        session.pending = event
                        session.pending_future = loop.run_in_executor(
                            None,
                            build_field,
                            session.grid,
                            cmd["goal"],
                            self.cfg.field_params,
                        )
                        session.status = "traversing"
                        await self._broadcast(
                            session,
                            {
                                "type": "ack",
                                "proto": PROTO_VERSION,
                                "tick": session.tick,
                                "goal": cmd["goal"].tolist(),
                            },
                        )
                    elif cmd["kind"] == "teleport":
                        session.state.root_xy = cmd["xy"].copy()
                        session.last_queries = None
                if session.pending is not None and session.pending_future.done():
                    session.fld = session.pending_future.result()
                    session.goal = session.pending.goal.copy()
                    session.pending.swap_tick = session.tick
                    session.pending = None
                    session.pending_future = None
                if session.status == "collided":
                    session.last_queries = None
                    parts = derive_parts(session.model, session.state)
                    session.last_queries = query_parts(session.fld, parts)
                elif session.pending is None and session.status == "traversing":
                    self._advance_motion(session)
                else:
                    # Holding: refresh queries so frames stay truthful.
                    parts = derive_parts(session.model, session.state)
                    session.last_queries = query_parts(session.fld, parts)
                    if check_collision(session.fld, parts):
                        session.status = "collided"
                session.history.append(
                    {
                        "tick": session.tick,
                        "status": session.status,
                        **_state_snapshot(session.state),
                    }
                )
                await self._broadcast(session, _frame(session))
                session.tick += 1
        except asyncio.CancelledError:
            raise
        except Exception as exc:  # freeze on internal errors, per contract
            session.frozen = True
            await self._broadcast(
                session,
                {"type": "error", "proto": PROTO_VERSION, "reason": str(exc)},
            )


def replay_session(
    manifest: SceneManifest,
    cfg: RunConfig,
    events: list[dict],
    total_ticks: int,
) -> list[dict]:
    """Re-run a recorded session headlessly from its goal-command log.

    Events carry {tick_issued, goal, swap_tick}; the agent holds from the
    tick after a goal is issued until its recorded swap tick, exactly as the
    live loop did, so the produced history matches the live one.
    """
    grid = manifest_to_grid(manifest)
    fld = build_field(grid, manifest.goal, cfg.field_params)
    goal = np.asarray(manifest.goal, dtype=np.float64)
    to_goal = goal[:2] - manifest.start[:2]
    heading = to_goal if np.linalg.norm(to_goal) > 1e-12 else np.array([1.0, 0.0])
    state = AgentState(root_xy=manifest.start[:2].copy(), heading=heading)
    status = "idle"
    model = cfg.agent
    parsed = [
        GoalEvent(
            tick_issued=int(e["tick_issued"]),
            goal=np.asarray(e["goal"], dtype=np.float64),
            swap_tick=None if e["swap_tick"] is None else int(e["swap_tick"]),
        )
        for e in events
    ]
    history = [{"tick": -1, "status": status, **_state_snapshot(state)}]
    for tick in range(total_ticks):
        for event in parsed:
            if event.tick_issued == tick:
                status = "traversing"
            if event.swap_tick == tick:
                fld = build_field(grid, event.goal, cfg.field_params)
                goal = event.goal.copy()
        latest = None
        for event in parsed:
            if event.tick_issued <= tick:
                latest = event
        pending = latest is not None and (
            latest.swap_tick is None or latest.swap_tick > tick
        )
        if status == "traversing" and not pending:
            for _ in range(SUBSTEPS):
                parts = derive_parts(model, state)
                if check_collision(fld, parts):
                    status = "collided"
                    break
                if float(np.linalg.norm(state.root_xy - goal[:2])) <= REACH_RADIUS:
                    status = "reached"
                    break
                queries = query_parts(fld, parts)
                state = step_follower(fld, model, state, SUBSTEP_DT, queries)
        history.append({"tick": tick, "status": status, **_state_snapshot(state)})
    return history


# ---------------------------------------------------------------------------
# FastAPI wiring
# ---------------------------------------------------------------------------


def create_app(cfg: RunConfig | None = None, default_manifest: SceneManifest | None = None) -> FastAPI:
    cfg = cfg or RunConfig()
    manager = SessionManager(cfg, default_manifest)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        for session in manager.sessions.values():
            session.frozen = True
            if session.task is not None:
                session.task.cancel()

    app = FastAPI(title="fieldnav teleop", lifespan=lifespan)
    app.state.manager = manager

    @app.post("/session")
    async def create_session(payload: dict):
        if "manifest" in payload:
            try:
                manifest = SceneManifest.from_dict(payload["manifest"])
            except FieldNavError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        elif "gen" in payload:
            gen = payload["gen"]
            try:
                manifest, _ = generate_scene(
                    int(gen.get("seed", 0)),
                    float(gen.get("difficulty", 0.2)),
                    cfg.scene,
                )
            except FieldNavError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        elif manager.default_manifest is not None:
            manifest = manager.default_manifest
        else:
            raise HTTPException(status_code=422, detail="need 'manifest' or 'gen'")
        try:
            session = manager.start_session(manifest)
        except FieldNavError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session.task = asyncio.create_task(manager.tick_loop(session))
        return {
            "proto": PROTO_VERSION,
            "id": session.session_id,
            "state": _frame(session),
        }

    @app.post("/session/{session_id}/goal")
    async def set_goal(session_id: str, payload: dict):
        session = manager.get(session_id)
        if session.status == "collided" or session.frozen:
            raise HTTPException(status_code=409, detail="session is frozen")
        try:
            goal = manager.snap_goal(session, float(payload["x"]), float(payload["y"]))
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=422, detail="payload needs numeric x, y")
        except FieldNavError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session.commands.append({"kind": "goal", "goal": goal})
        return {"proto": PROTO_VERSION, "goal": goal.tolist()}

    @app.get("/session/{session_id}/scene")
    async def get_scene(session_id: str):
        session = manager.get(session_id)
        spec = session.manifest.grid_spec()
        res = spec.resolution
        centers_z = spec.origin[2] + (np.arange(spec.dims[2]) + 0.5) * res
        band = centers_z < cfg.scene.stand_band
        blocked = session.grid.occupied[:, :, band].any(axis=2)
        return {
            "proto": PROTO_VERSION,
            "manifest": session.manifest.to_dict(),
            "resolution": res,
            "origin": spec.origin.tolist(),
            "dims": list(spec.dims),
            "blocked": blocked.astype(int).tolist(),
        }

    @app.get("/session/{session_id}/log")
    async def get_log(session_id: str):
        session = manager.get(session_id)
        return {
            "proto": PROTO_VERSION,
            "manifest": session.manifest.to_dict(),
            "events": [
                {
                    "tick_issued": e.tick_issued,
                    "goal": e.goal.tolist(),
                    "swap_tick": e.swap_tick,
                }
                for e in session.events
            ],
            "history": session.history,
            "ticks": session.tick,
        }

    @app.post("/session/{session_id}/debug/teleport")
    async def teleport(session_id: str, payload: dict):
        session = manager.get(session_id)
        xy = np.array([float(payload["x"]), float(payload["y"])])
        session.commands.append({"kind": "teleport", "xy": xy})
        return {"proto": PROTO_VERSION, "xy": xy.tolist()}

    @app.websocket("/session/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        session = manager.sessions.get(session_id)
        if session is None:
            await websocket.close(code=4004)
            return
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue(maxsize=64)
        session.subscribers.append(queue)
        try:
            await websocket.send_text(json.dumps(_frame(session)))
            while True:
                message = await queue.get()
                await websocket.send_text(json.dumps(message))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            if queue in session.subscribers:
                session.subscribers.remove(queue)

    @app.get("/", response_class=HTMLResponse)
    async def index():
        return "<html><body>fieldnav teleop server; see frontend/ for the map client.</body></html>"

    return app
