"""Live labeling sessions over HTTP.

Each session runs one ranking pipeline on its own thread against a blocking
oracle: when the algorithm needs a label the thread suspends, the pair is
exposed as the session's single pending question, and an answer resumes it.
Answers are appended to a per-session JSON-lines log; restarting the service
replays the log and (same stored seed) reaches the same suspension point.
"""

from __future__ import annotations

import json
import math
import secrets
import threading
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .decompose import DecomposeConfig
from .pipeline import run_pipeline

MAX_ITEMS = 200
MIN_ITEMS = 2
DEFAULT_EPS = 0.3
# Hard cap on questions per session: CAP_FACTOR * n * ln(n)^2.
CAP_FACTOR = 1.0
# Human-scale constants: tiny cost-estimate samples, improvement loop off
# (its floor exceeds any session size at these values).
SERVICE_CONFIG_OVERRIDES = {"c_cost_sample": 0.05}
ANSWER_WAIT_SECONDS = 30.0


class HumanOracle:
    """Blocking oracle fed by HTTP answers; one pending pair at a time."""

    def __init__(self, n: int):
        self.n = n
        self.answers: dict[tuple[int, int], int] = {}  # canonical (u<v) -> W(u,v)
        self.pending: tuple[int, int] | None = None
        self.cv = threading.Condition()
        self.closed = False

    def value(self, u: int, v: int) -> int:
        key, flip = ((u, v), False) if u < v else ((v, u), True)
        with self.cv:
            while key not in self.answers:
                if self.closed:
                    raise RuntimeError("session closed")
                self.pending = key
                self.cv.notify_all()
                self.cv.wait(timeout=1.0)
            self.pending = None
            w = self.answers[key]
        return 1 - w if flip else w

    def submit(self, u: int, v: int, w_uv: int) -> bool:
        """Record W(u, v); returns False if (u, v) is not the pending pair."""
        key = (u, v) if u < v else (v, u)
        w = w_uv if u < v else 1 - w_uv
        with self.cv:
            if self.pending != key:
                return False
            self.answers[key] = w
            self.cv.notify_all()
        return True

    def preload(self, u: int, v: int, w_uv: int) -> None:
        key = (u, v) if u < v else (v, u)
        with self.cv:
            self.answers[key] = w_uv if u < v else 1 - w_uv

    def wait_pending(self, timeout: float) -> tuple[int, int] | None:
        with self.cv:
            if self.pending is None:
                self.cv.wait(timeout=timeout)
            return self.pending


class Session:
    def __init__(self, sid: str, items: list[str], eps: float, seed: int,
                 log_path: Path):
        self.id = sid
        self.items = items
        self.eps = eps
        self.seed = seed
        self.log_path = log_path
        self.n = len(items)
        self.oracle = HumanOracle(self.n)
        self.result_order: list[int] | None = None
        self.error: str | None = None
        self.lock = threading.Lock()  # serializes answer submission
        self.budget = max(self.n, int(CAP_FACTOR * self.n * math.log(self.n) ** 2))
        self.thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> None:
        self.thread.start()

    def _run(self) -> None:
        try:
            config = DecomposeConfig(eps=self.eps, **SERVICE_CONFIG_OVERRIDES)
            res = run_pipeline(self.oracle, self.n, self.eps, self.seed,
                               config=config, budget=self.budget)
            self.result_order = list(res.permutation.order)
        except Exception as exc:  # surfaced in session state
            self.error = str(exc)
        finally:
            with self.oracle.cv:
                self.oracle.pending = None
                self.oracle.cv.notify_all()

    @property
    def done(self) -> bool:
        return self.result_order is not None or self.error is not None

    def ranking(self) -> list[str] | None:
        if self.result_order is None:
            return None
        return [self.items[i] for i in self.result_order]

    def answered_count(self) -> int:
        with self.oracle.cv:
            return len(self.oracle.answers)

    def pending_names(self, timeout: float = ANSWER_WAIT_SECONDS) -> tuple[str, str] | None:
        deadline = timeout
        while deadline > 0 and not self.done:
            got = self.oracle.wait_pending(min(0.2, deadline))
            if got is not None:
                return self.items[got[0]], self.items[got[1]]
            deadline -= 0.2
        got = self.oracle.wait_pending(0.0)
        if got is not None:
            return self.items[got[0]], self.items[got[1]]
        return None

    def log_event(self, event: dict) -> None:
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(event) + "\n")


class SessionStore:
    def __init__(self, data_dir: str | Path):
        self.dir = Path(data_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        for path in sorted(self.dir.glob("*.jsonl")):
            try:
                self._replay(path)
            except Exception:
                continue  # a corrupt log must not take down the service

    def _replay(self, path: Path) -> None:
        lines = [json.loads(ln) for ln in path.read_text().splitlines() if ln.strip()]
        if not lines or lines[0].get("type") != "created":
            return
        head = lines[0]
        session = Session(head["id"], head["items"], head["eps"], head["seed"], path)
        for event in lines[1:]:
            if event.get("type") == "answer":
                session.oracle.preload(event["u"], event["v"], event["w"])
        session.start()
        self.sessions[session.id] = session

    def create(self, items: list[str], eps: float) -> Session:
        sid = secrets.token_hex(8)
        seed = int.from_bytes(secrets.token_bytes(4), "big")
        session = Session(sid, items, eps, seed, self.dir / f"{sid}.jsonl")
        session.log_event({"type": "created", "id": sid, "items": items,
                           "eps": eps, "seed": seed})
        session.start()
        self.sessions[sid] = session
        return session

    def get(self, sid: str) -> Session | None:
        return self.sessions.get(sid)


class CreateBody(BaseModel):
    items: list[str]
    eps: float = DEFAULT_EPS


class AnswerBody(BaseModel):
    u: str
    v: str
    preferred: str


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": code, "message": message})


def create_app(data_dir: str | Path = "./rank-sessions",
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="pairrank labeling service")
    store = SessionStore(data_dir)
    app.state.store = store

    @app.post("/sessions")
    def create_session(body: CreateBody):
        items = body.items
        if not MIN_ITEMS <= len(items) <= MAX_ITEMS:
            return _error(400, "bad_item_count",
                          f"need between {MIN_ITEMS} and {MAX_ITEMS} items")
        if len(set(items)) != len(items):
            return _error(400, "duplicate_items", "item names must be distinct")
        if not 0 < body.eps < 1:
            return _error(400, "bad_eps", "eps must lie in (0, 1)")
        session = store.create(items, body.eps)
        return {"id": session.id, "n": session.n}

    @app.get("/sessions/{sid}/next")
    def next_query(sid: str):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown_session", f"no session {sid}")
        pending = session.pending_names()
        if pending is not None:
            return {"u": pending[0], "v": pending[1],
                    "answered": session.answered_count()}
        if session.error is not None:
            return _error(500, "session_failed", session.error)
        if session.done:
            return {"done": True, "ranking": session.ranking(),
                    "answered": session.answered_count()}
        return _error(504, "not_ready", "no pending question yet; retry")

    @app.post("/sessions/{sid}/answer")
    def submit_answer(sid: str, body: AnswerBody):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown_session", f"no session {sid}")
        try:
            u = session.items.index(body.u)
            v = session.items.index(body.v)
        except ValueError:
            return _error(400, "unknown_item", "u and v must be session items")
        if body.preferred not in (body.u, body.v):
            return _error(400, "bad_preferred", "preferred must be u or v")
        w_uv = 1 if body.preferred == body.u else 0
        with session.lock:
            accepted = session.oracle.submit(u, v, w_uv)
            if not accepted:
                pending = session.pending_names(timeout=2.0)
                content = {"error": "stale_pair",
                           "message": "that pair is not the pending question"}
                if pending is not None:
                    content["pending"] = {"u": pending[0], "v": pending[1]}
                return JSONResponse(status_code=409, content=content)
            key = (u, v) if u < v else (v, u)
            w = w_uv if u < v else 1 - w_uv
            session.log_event({"type": "answer", "u": key[0], "v": key[1], "w": w})
        return {"ok": True, "answered": session.answered_count()}

    @app.get("/sessions/{sid}")
    def session_state(sid: str):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown_session", f"no session {sid}")
        pending = session.oracle.wait_pending(0.0)
        return {
            "id": session.id,
            "items": session.items,
            "state": "done" if session.done else "running",
            "answered": session.answered_count(),
            "pending": ({"u": session.items[pending[0]],
                         "v": session.items[pending[1]]} if pending else None),
            "ranking": session.ranking(),
            "budget": session.budget,
            "error": session.error,
        }

    if static_dir is None:
        static_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    static_dir = Path(static_dir)
    if static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
