"""HTTP JSON API over the platform.

All routes live under /v1 and speak JSON; 4xx responses carry machine-
readable error codes the UI depends on: parse_error (with offset),
invalid_sequence, invalid_config (422), unknown ids (404), out_of_order
(409), lease_expired (410).  Static frontend assets, when built, are served
from the configured directory at /.
"""
from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .annotations import ConfigError, SessionError, project_to_config
from .clock import SimulatedClock, parse_timestamp
from .engine import Platform
from .trends import trends_to_csv

log = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1"
    port: int = 8787
    data_dir: str = "data"
    project_paths: tuple[str, ...] = ()
    worker_count: int = 1
    clock_mode: str = "real"  # real | simulated
    static_dir: str | None = None


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.body = {"error": {"code": code, "message": message, **extra}}


_SESSION_ERROR_STATUS = {
    "no_session": 409,
    "out_of_order": 409,
    "already_labelled": 409,
    "lease_expired": 410,
    "unknown_answer": 404,
    "no_sessions": 404,
    "duplicate_project": 409,
}


def _question_view(question) -> dict:
    return {
        "question_id": question.question_id,
        "prompt": question.prompt,
        "answers": [{"answer_id": a.answer_id, "label": a.label}
                    for a in question.answers],
    }


def _project_view(runtime) -> dict:
    p = runtime.project
    return {
        "project_id": p.project_id,
        "title": p.title,
        "keywords": list(p.keywords),
        "query": p.canonical_query,
        "start_question": p.sequence.start,
        "sentiment_question": p.sentiment_question,
        "classes": list(p.classes()),
        "consensus_k": p.queue_config.consensus_k,
        "model_version": runtime.model.version if runtime.model else 0,
    }


class Api:
    """Route table + handlers, separated from the HTTP plumbing for tests."""

    def __init__(self, platform: Platform):
        self.platform = platform
        self.routes = [
            ("GET", re.compile(r"^/v1/projects$"), self.list_projects),
            ("POST", re.compile(r"^/v1/projects$"), self.create_project),
            ("GET", re.compile(r"^/v1/projects/(?P<pid>[^/]+)$"), self.get_project),
            ("GET", re.compile(r"^/v1/projects/(?P<pid>[^/]+)/next$"), self.next_document),
            ("POST", re.compile(r"^/v1/projects/(?P<pid>[^/]+)/answers$"), self.submit_answer),
            ("GET", re.compile(r"^/v1/projects/(?P<pid>[^/]+)/trends$"), self.trends),
            ("GET", re.compile(r"^/v1/projects/(?P<pid>[^/]+)/trends.csv$"), self.trends_csv),
            ("GET", re.compile(r"^/v1/projects/(?P<pid>[^/]+)/queue$"), self.queue_snapshot),
            ("GET", re.compile(r"^/v1/metrics$"), self.metrics),
            ("GET", re.compile(r"^/metrics$"), self.metrics),
            ("POST", re.compile(r"^/v1/admin/clock$"), self.advance_clock),
        ]

    def dispatch(self, method: str, path: str, query: dict, body: dict | None):
        for verb, pattern, handler in self.routes:
            match = pattern.match(path)
            if match and verb == method:
                return handler(query=query, body=body, **match.groupdict())
        raise ApiError(404, "not_found", f"no route for {method} {path}")

    def _runtime(self, pid: str):
        try:
            return self.platform.runtime(pid)
        except KeyError:
            raise ApiError(404, "unknown_project", f"no project {pid!r}")

    @staticmethod
    def _one(query: dict, key: str) -> str | None:
        values = query.get(key)
        return values[0] if values else None

    # -- handlers -------------------------------------------------------------

    def list_projects(self, query, body):
        return 200, [_project_view(rt) for rt in self.platform.projects.values()]

    def create_project(self, query, body):
        if not isinstance(body, dict):
            raise ApiError(422, "invalid_config", "JSON object body required")
        try:
            runtime = self.platform.create_project(body)
        except ConfigError as exc:
            raise ApiError(422, "invalid_config", "project config rejected",
                           violations=exc.violations)
        except SessionError as exc:
            raise ApiError(_SESSION_ERROR_STATUS.get(exc.code, 400), exc.code, str(exc))
        return 201, _project_view(runtime)

    def get_project(self, query, body, pid):
        runtime = self._runtime(pid)
        view = _project_view(runtime)
        view["config"] = project_to_config(runtime.project)
        return 200, view

    def next_document(self, query, body, pid):
        user = self._one(query, "user")
        if not user:
            raise ApiError(422, "invalid_config", "user parameter required")
        self._runtime(pid)
        session = self.platform.start_session(pid, user)
        if session is None:
            return 204, None
        return 200, {
            "doc_id": session["doc_id"],
            "text": session["text"],
            "question": _question_view(session["question"]),
        }

    def submit_answer(self, query, body, pid):
        self._runtime(pid)
        if not isinstance(body, dict):
            raise ApiError(422, "invalid_config", "JSON object body required")
        missing = [k for k in ("user", "doc", "question", "answer") if not body.get(k)]
        if missing:
            raise ApiError(422, "invalid_config", f"missing fields: {missing}")
        try:
            nxt, consensus = self.platform.submit_answer(
                pid, body["user"], body["doc"], body["question"], body["answer"])
        except SessionError as exc:
            raise ApiError(_SESSION_ERROR_STATUS.get(exc.code, 400), exc.code, str(exc))
        except KeyError as exc:
            raise ApiError(404, "unknown_question", str(exc))
        if nxt is not None:
            return 200, {"status": "next", "question": _question_view(nxt)}
        out = {"status": "complete"}
        if consensus is not None:
            out["consensus"] = {
                "label": consensus.label,
                "support": consensus.support,
                "total": consensus.total,
            }
        return 200, out

    def _trend_points(self, query, pid):
        runtime = self._runtime(pid)
        from_raw = self._one(query, "from")
        to_raw = self._one(query, "to")
        if not from_raw or not to_raw:
            raise ApiError(422, "bad_range", "from and to parameters required")
        try:
            # tolerate an unencoded '+' in the offset, which querystring
            # decoding turns into a space
            from_ts = parse_timestamp(from_raw.replace(" ", "+"))
            to_ts = parse_timestamp(to_raw.replace(" ", "+"))
        except ValueError as exc:
            raise ApiError(422, "bad_range", f"bad timestamp: {exc}")
        if from_ts >= to_ts:
            raise ApiError(422, "bad_range", "from must be before to")
        return self.platform.trend_points(pid, from_ts, to_ts)

    def trends(self, query, body, pid):
        points = self._trend_points(query, pid)
        return 200, [p.to_json_dict() for p in points]

    def trends_csv(self, query, body, pid):
        points = self._trend_points(query, pid)
        return 200, trends_to_csv(points)

    def queue_snapshot(self, query, body, pid):
        runtime = self._runtime(pid)
        return 200, runtime.queue.snapshot(self.platform.clock.now())

    def metrics(self, query, body):
        return 200, self.platform.metrics()

    def advance_clock(self, query, body):
        clock = self.platform.clock
        if not isinstance(clock, SimulatedClock):
            raise ApiError(409, "real_clock", "clock advance requires simulated mode")
        seconds = float((body or {}).get("advance", 0))
        clock.advance(seconds)
        return 200, {"now": clock.now().isoformat()}


class _Handler(BaseHTTPRequestHandler):
    api: Api = None  # set by serve()
    static_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def _respond(self, status: int, payload, content_type="application/json"):
        if status == 204 or payload is None:
            self.send_response(status)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        if isinstance(payload, str):
            data = payload.encode("utf-8")
        else:
            data = json.dumps(payload).encode("utf-8")
            content_type = "application/json"
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _handle(self, method: str):
        parsed = urlparse(self.path)
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                self._respond(400, {"error": {"code": "bad_json",
                                              "message": "request body is not JSON"}})
                return
        if method == "GET" and self.static_dir and not parsed.path.startswith("/v1") \
                and parsed.path not in ("/metrics",):
            if self._serve_static(parsed.path):
                return
        try:
            result = self.api.dispatch(method, parsed.path, parse_qs(parsed.query), body)
            status, payload = result
            content_type = "text/csv; charset=utf-8" \
                if parsed.path.endswith(".csv") else "application/json"
            self._respond(status, payload, content_type)
        except ApiError as exc:
            self._respond(exc.status, exc.body)
        except Exception:
            log.exception("unhandled error for %s %s", method, self.path)
            self._respond(500, {"error": {"code": "internal",
                                          "message": "internal error"}})

    def _serve_static(self, path: str) -> bool:
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) \
                or not target.is_file():
            return False
        types = {".html": "text/html", ".js": "text/javascript",
                 ".css": "text/css", ".svg": "image/svg+xml",
                 ".map": "application/json"}
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")


class Service:
    """Running HTTP server bound to a platform; stop() drains and snapshots."""

    def __init__(self, platform: Platform, listen: str = "127.0.0.1",
                 port: int = 0, static_dir: str | None = None):
        self.platform = platform
        api = Api(platform)
        handler = type("BoundHandler", (_Handler,), {
            "api": api,
            "static_dir": Path(static_dir) if static_dir else None,
        })
        self.server = ThreadingHTTPServer((listen, port), handler)
        self._thread: threading.Thread | None = None
        self._stopping = threading.Event()
        self._maintenance: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    def _maintain(self):
        # periodic cached-priority refresh for every project's queue
        while not self._stopping.wait(5.0):
            for rt in list(self.platform.projects.values()):
                try:
                    self.platform.maybe_reprioritize(rt)
                except Exception:
                    log.exception("queue maintenance failed")

    def start(self) -> "Service":
        self._thread = threading.Thread(target=self.server.serve_forever,
                                        name="labelloop-http", daemon=True)
        self._thread.start()
        self._maintenance = threading.Thread(target=self._maintain,
                                             name="labelloop-maintenance",
                                             daemon=True)
        self._maintenance.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        self.server.shutdown()
        self.server.server_close()
        if self._thread:
            self._thread.join()
        if self._maintenance:
            self._maintenance.join()
        self.platform.close()
