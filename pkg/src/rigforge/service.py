"""Local HTTP/WebSocket service for interactive rigging and deformation.

A client uploads a closed mesh once (``POST /sessions``), which builds the rig
and returns joint/bone summaries; it then opens ``/sessions/{id}/stream`` and
sends handle updates as the user drags. The service streams back deformed
vertex buffers with distortion reports. Topology is sent once on connect —
deformation never changes it, so frames carry positions only.

Handle updates are latest-wins: while a deformation is computing, newer
updates overwrite the pending slot and superseded ones are never computed, so
a fast drag cannot queue up stale work. At most one already-computing stale
frame may still be delivered before the newest one lands.
"""

from __future__ import annotations

import asyncio
import os
import tempfile
import uuid
import warnings
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request, WebSocket, WebSocketDisconnect

from .deform import ControlHandles, DegenerateRotationWarning, deform
from .distortion import DistortionReport
from .frame import DegenerateFrameError
from .mesh import Mesh, MeshError, load_mesh
from .pipeline import build_rig
from .rigfile import Rig
from .slicer import OpenMeshError

__all__ = ["Session", "SessionManager", "create_app", "DEFAULT_MAX_VERTICES"]

DEFAULT_MAX_VERTICES = 200_000


@dataclass
class Session:
    """One uploaded mesh with its rig and streaming state."""

    id: str
    mesh: Mesh
    rig: Rig
    revision: int = 0  # +1 per accepted handle update
    current_handles: ControlHandles | None = None
    latest_report: DistortionReport | None = None
    pending: tuple[int, ControlHandles] | None = None  # latest-wins slot
    dirty: asyncio.Event = field(default_factory=asyncio.Event)
    streaming: bool = False

    def summary(self) -> dict:
        sk = self.rig.skeleton
        return {
            "session_id": self.id,
            "joint_count": sk.n_joints,
            "bone_count": len(sk.bones),
            "chain_count": self.rig.chain_count,
            "vertex_count": self.mesh.n_vertices,
            "joints": sk.joints.tolist(),
            "bones": sk.bones.tolist(),
            "handle_candidates": list(range(sk.n_joints)),
        }


class SessionManager:
    """In-memory session table; no persistence by design."""

    def __init__(self, max_vertices: int = DEFAULT_MAX_VERTICES):
        self.max_vertices = max_vertices
        self._sessions: dict[str, Session] = {}

    def create(self, mesh: Mesh) -> Session:
        session = Session(id=uuid.uuid4().hex, mesh=mesh, rig=build_rig(mesh))
        self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def close(self, session_id: str) -> bool:
        return self._sessions.pop(session_id, None) is not None

    def __len__(self) -> int:
        return len(self._sessions)


def _mesh_from_bytes(body: bytes) -> Mesh:
    """Parse an uploaded OBJ body via a throwaway temp file."""
    fd, path = tempfile.mkstemp(suffix=".obj")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
        return load_mesh(path)
    finally:
        os.unlink(path)


def _parse_handles(entries, n_joints: int) -> ControlHandles:
    try:
        joints = [int(e["joint"]) for e in entries]
        targets = [[float(e["x"]), float(e["y"]), float(e["z"])] for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed handle entry: {exc}") from exc
    handles = ControlHandles(np.array(joints, dtype=np.int64), np.array(targets))
    if np.any(handles.joints < 0) or np.any(handles.joints >= n_joints):
        raise IndexError(f"handle joint outside 0..{n_joints - 1}")
    return handles


def _deform_once(session: Session, handles: ControlHandles):
    with warnings.catch_warnings():
        # single-handle drags are routine here; the fallback is the intent
        warnings.simplefilter("ignore", DegenerateRotationWarning)
        out_mesh, _pose, report = deform(
            session.mesh, session.rig.skeleton, session.rig.binding, handles
        )
    return out_mesh, report


async def _frame_loop(session: Session, ws: WebSocket) -> None:
    while True:
        await session.dirty.wait()
        session.dirty.clear()
        revision, handles = session.pending
        try:
            out_mesh, report = await asyncio.to_thread(_deform_once, session, handles)
        except Exception as exc:  # keep streaming after a failed solve
            await ws.send_json(
                {"type": "error", "code": 500, "message": f"deformation failed: {exc}"}
            )
            continue
        session.latest_report = report
        await ws.send_json(
            {
                "type": "frame",
                "revision": revision,
                "vertices": out_mesh.vertices.tolist(),
                "report": report.to_jsonable(),
            }
        )


def create_app(max_vertices: int = DEFAULT_MAX_VERTICES) -> FastAPI:
    app = FastAPI(title="rigforge session service")
    manager = SessionManager(max_vertices=max_vertices)
    app.state.manager = manager

    @app.post("/sessions")
    async def create_session(request: Request) -> dict:
        body = await request.body()
        try:
            mesh = await asyncio.to_thread(_mesh_from_bytes, body)
        except (MeshError, UnicodeDecodeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed mesh: {exc}")
        if mesh.n_vertices > manager.max_vertices:
            raise HTTPException(
                status_code=413,
                detail=f"mesh has {mesh.n_vertices} vertices, limit {manager.max_vertices}",
            )
        try:
            session = await asyncio.to_thread(manager.create, mesh)
        except (OpenMeshError, DegenerateFrameError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return session.summary()

    @app.delete("/sessions/{session_id}")
    async def close_session(session_id: str) -> dict:
        if not manager.close(session_id):
            raise HTTPException(status_code=404, detail="unknown session")
        return {"session_id": session_id, "closed": True}

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str) -> None:
        session = manager.get(session_id)
        await ws.accept()
        if session is None:
            await ws.close(code=4404, reason="unknown session")
            return
        if session.streaming:
            await ws.close(code=4409, reason="stream already open")
            return
        session.streaming = True
        sk = session.rig.skeleton
        await ws.send_json(
            {
                "type": "topology",
                "faces": session.mesh.faces.tolist(),
                "joints": sk.joints.tolist(),
                "bones": sk.bones.tolist(),
            }
        )
        worker = asyncio.create_task(_frame_loop(session, ws))
        try:
            while True:
                try:
                    message = await ws.receive_json()
                except ValueError:  # non-JSON payload; keep the connection
                    await ws.send_json(
                        {"type": "error", "code": 400, "message": "payload is not JSON"}
                    )
                    continue
                if not isinstance(message, dict) or message.get("type") != "handles":
                    await ws.send_json(
                        {"type": "error", "code": 400, "message": "expected a handles message"}
                    )
                    continue
                try:
                    handles = _parse_handles(message.get("handles", []), sk.n_joints)
                except IndexError as exc:
                    await ws.send_json({"type": "error", "code": 422, "message": str(exc)})
                    continue
                except ValueError as exc:
                    await ws.send_json({"type": "error", "code": 400, "message": str(exc)})
                    continue
                session.revision += 1
                session.current_handles = handles
                session.pending = (int(message.get("revision", session.revision)), handles)
                session.dirty.set()
        except WebSocketDisconnect:
            pass
        finally:
            worker.cancel()
            session.streaming = False

    return app
