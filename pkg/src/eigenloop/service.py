"""HTTP facade over the progressive loop.

Sessions wrap a suspended loop; humans (or scripts) fetch pending
eigen-sample queries, post labels, and watch metrics respond. Label posts
that complete a step hand off to a background worker, so clients poll the
session status instead of waiting on a long request.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import config as cfgmod
from .errors import ConfigError, EigenloopError
from .transfer import ProgressiveLoop

NEIGHBOR_COUNT = 5


def pca_2d(x: np.ndarray) -> np.ndarray:
    """Project onto the top-2 principal components of the mean-centered data.

    Sign convention: each component's largest-magnitude loading is positive,
    which makes the projection deterministic.
    """
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2].copy()
    if comps.shape[0] < 2:  # 1-D feature space: pad a zero component
        comps = np.vstack([comps, np.zeros_like(comps[0])])
    for i in range(2):
        j = int(np.abs(comps[i]).argmax())
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return centered @ comps.T


@dataclass(eq=False)
class Session:
    sid: str
    loop: ProgressiveLoop
    config_doc: dict
    lock: threading.RLock = field(default_factory=threading.RLock)
    worker: threading.Thread | None = None
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "failed"
        if self.worker is not None and self.worker.is_alive():
            return "stepping"
        return self.loop.status

    def maybe_step_in_background(self) -> None:
        """Call with the lock held; spawns the advance worker when ready."""
        if not self.loop.ready_to_step:
            return

        def run() -> None:
            with self.lock:
                try:
                    self.loop.step()
                except EigenloopError as exc:
                    self.error = str(exc)

        self.worker = threading.Thread(target=run, daemon=True)
        self.worker.start()

    def join(self, timeout: float = 60.0) -> None:
        if self.worker is not None:
            self.worker.join(timeout)


def _error(status: int, message: str, fieldpath: str | None = None) -> JSONResponse:
    body: dict[str, Any] = {"error": message}
    if fieldpath:
        body["field"] = fieldpath
    return JSONResponse(status_code=status, content=body)


def build_session(config_doc: dict) -> Session:
    cfg = cfgmod.load_config(doc=config_doc)
    data = cfgmod.build_data(cfg)
    inputs = cfgmod.build_transfer_inputs(cfg, data)
    loop = ProgressiveLoop(
        inputs.features,
        inputs.truth,
        inputs.test,
        inputs.test_truth,
        inputs.indicators,
        inputs.budget,
        inputs.finetune_cfg,
        inputs.kmeans_cfg,
        cfg["seed"],
        inputs.normalize,
    ).start()
    return Session(uuid.uuid4().hex, loop, cfg)


def create_app() -> FastAPI:
    app = FastAPI(title="eigenloop")
    app.state.sessions = {}

    def get_session(sid: str) -> Session | None:
        return app.state.sessions.get(sid)

    @app.exception_handler(EigenloopError)
    async def handle_toolkit_error(_req: Request, exc: EigenloopError):
        status = 400 if isinstance(exc, ConfigError) else 409
        return _error(status, str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be a JSON object")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        try:
            session = build_session(body)
        except ConfigError as exc:
            msg = str(exc)
            fieldpath = msg.split(":", 1)[0] if ":" in msg else None
            return _error(400, msg, fieldpath)
        except EigenloopError as exc:
            return _error(400, str(exc))
        except MemoryError:
            return _error(503, "resources exhausted")
        app.state.sessions[session.sid] = session
        return {"id": session.sid}

    @app.get("/sessions/{sid}")
    def session_info(sid: str):
        session = get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            budget = session.loop.budget
            return {
                "status": session.status,
                "kappa": session.loop.kappa,
                "budget": {
                    "classes": budget.classes,
                    "schedule": list(budget.schedule),
                    "kappa_max": budget.kappa_max,
                    "epsilon": budget.epsilon,
                    "total_extra": budget.total_extra,
                    "spent": session.loop.history[-1].labels_spent if session.loop.history else 0,
                },
            }

    @app.get("/sessions/{sid}/pending")
    def pending(sid: str):
        session = get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            loop = session.loop
            items = loop.pending
            if not items:
                return []
            coords = pca_2d(loop.features.data)
            pos = {sample_id: k for k, sample_id in enumerate(loop.features.ids)}
            labeled_ids = loop.labeled.ids()
            labeled_rows = loop.features.rows(labeled_ids)
            out = []
            for cluster, sample_id in items:
                row = loop.features.row(sample_id)
                diff = labeled_rows - row
                d2 = np.einsum("nd,nd->n", diff, diff)
                order = np.argsort(d2, kind="stable")[:NEIGHBOR_COUNT]
                neighbors = [
                    {
                        "id": int(labeled_ids[i]),
                        "label": loop.labeled.label(labeled_ids[i]),
                        "distance": float(np.sqrt(d2[i])),
                    }
                    for i in order
                ]
                k = pos[sample_id]
                out.append(
                    {
                        "sample_id": int(sample_id),
                        "cluster": int(cluster),
                        "x": float(coords[k, 0]),
                        "y": float(coords[k, 1]),
                        "neighbors": neighbors,
                    }
                )
            return out

    @app.post("/sessions/{sid}/labels")
    async def post_labels(sid: str, request: Request):
        session = get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be a JSON list")
        if not isinstance(body, list):
            return _error(400, "request body must be a JSON list")
        answers: dict[int, int] = {}
        malformed: list[dict] = []
        for item in body:
            if (
                not isinstance(item, dict)
                or not isinstance(item.get("sample_id"), int)
                or not isinstance(item.get("label"), int)
            ):
                malformed.append({"item": item, "reason": "expected {sample_id, label}"})
                continue
            if item["sample_id"] in answers:
                malformed.append({"item": item, "reason": "duplicate in batch"})
                continue
            answers[item["sample_id"]] = item["label"]
        with session.lock:
            if session.status == "stepping":
                return _error(409, "session is stepping; poll status and retry")
            if session.loop.status != "awaiting-labels":
                return _error(409, f"session is {session.loop.status}, not awaiting labels")
            accepted, rejected = session.loop.submit_labels(answers)
            session.maybe_step_in_background()
        rejected_out = [{"sample_id": sid_, "reason": reason} for sid_, reason in rejected]
        rejected_out.extend(malformed)
        return {"accepted": len(accepted), "rejected": rejected_out}

    @app.get("/sessions/{sid}/projection")
    def projection(sid: str):
        session = get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            loop = session.loop
            coords = pca_2d(loop.features.data)
            assignment = loop.last_assignment or {}
            return [
                {
                    "id": int(sample_id),
                    "x": float(coords[k, 0]),
                    "y": float(coords[k, 1]),
                    "cluster": assignment.get(int(sample_id), -1),
                    "labeled": sample_id in loop.labeled,
                }
                for k, sample_id in enumerate(loop.features.ids)
            ]

    @app.get("/sessions/{sid}/metrics")
    def metrics(sid: str):
        session = get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            return {
                "status": session.status,
                "rows": [r.as_dict() for r in session.loop.history],
            }

    return app
