"""Local HTTP inference service consumed by the browser extension and CLI.

Endpoints (JSON over HTTP/1.1, versioned under /api/v1/):

  GET  /health            -> {status, model_version, n_trees, provider_name}
  POST /api/v1/predict    -> ranked predictions for a live Gerrit change
  POST /api/v1/score      -> score one explicit record pair

Binds to loopback by default: inference stays on the reviewer's machine,
so no code or metadata leaves it. Cross-origin responses carry allow-origin
headers only for origins explicitly configured at startup.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from datetime import timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from .embedding import EmbeddingCache, EmbeddingProvider, FallbackProvider
from .forest import ForestModel, load_model
from .gerrit import ChangeNotFoundError, GerritClient, GerritConfig, GerritError
from .pipeline import RankRequest, rank_candidates, score_pair
from .records import (
    ChangeRecord,
    RecordError,
    WindowConfig,
    WindowMode,
    change_from_dict,
    format_timestamp,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServiceConfig:
    model_path: str | Path
    gerrit: GerritConfig | None = None
    provider: EmbeddingProvider = field(default_factory=FallbackProvider)
    listen_host: str = "127.0.0.1"
    listen_port: int = 8787
    allowed_origins: tuple[str, ...] = ()
    window_days: int = 14
    top_k: int = 5
    window_mode: WindowMode = WindowMode.LOOKBACK
    cross_project: bool = False


class RequestError(Exception):
    """Maps to an HTTP 4xx/5xx JSON error response."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _record_to_response(record: ChangeRecord) -> dict[str, Any]:
    return {
        "change_key": record.change_key,
        "project": record.project,
        "subject": record.subject,
        "url": record.url,
        "created_at": format_timestamp(record.created_at),
    }


class ServiceApp:
    """Request-independent state: model, provider, shared embedding cache."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.model: ForestModel = load_model(config.model_path)
        self.provider = config.provider
        self.cache = EmbeddingCache()
        self.gerrit = GerritClient(config.gerrit) if config.gerrit else None

    def health(self) -> dict[str, Any]:
        return {
            "status": "ok",
            "model_version": self.model.version,
            "n_trees": self.model.n_trees,
            "provider_name": self.provider.name,
        }

    def predict(self, body: dict[str, Any]) -> dict[str, Any]:
        change_id = str(body.get("change_id") or "")
        if not change_id:
            raise RequestError(400, "change_id is required")
        window_days = self._int_param(body, "window_days", self.config.window_days)
        if not 1 <= window_days <= 365:
            raise RequestError(400, f"window_days must be in 1..365, got {window_days}")
        top_k = self._int_param(body, "top_k", self.config.top_k)
        if top_k < 1:
            raise RequestError(400, f"top_k must be >= 1, got {top_k}")
        mode_raw = str(body.get("window_mode") or self.config.window_mode.value)
        try:
            mode = WindowMode(mode_raw)
        except ValueError:
            raise RequestError(400, f"unknown window_mode {mode_raw!r}") from None
        if self.gerrit is None:
            raise RequestError(502, "no gerrit instance configured")

        started = time.perf_counter()
        try:
            target = self.gerrit.get_change(change_id)
        except ChangeNotFoundError:
            raise RequestError(404, f"change {change_id!r} not found on gerrit") from None
        except GerritError as exc:
            raise RequestError(502, f"gerrit error: {exc}") from None

        t = target.created_at
        delta = timedelta(days=window_days)
        after, before = (t - delta, t) if mode is WindowMode.LOOKBACK else (t - delta, t + delta)
        project = str(body.get("project") or target.project)
        try:
            pool = self.gerrit.query_changes(project, after, before)
        except GerritError as exc:
            raise RequestError(502, f"gerrit error: {exc}") from None

        request = RankRequest(
            target=target,
            pool=tuple(pool),
            window=WindowConfig(days=window_days, mode=mode),
            top_k=top_k,
        )
        predictions = rank_candidates(
            request,
            self.model,
            self.provider,
            self.cache,
            same_project=not self.config.cross_project,
        )
        timing_ms = (time.perf_counter() - started) * 1000.0
        return {
            "target": _record_to_response(target),
            "window_days": window_days,
            "window_mode": mode.value,
            "top_k": top_k,
            "predictions": [
                {
                    "rank": p.rank,
                    "change_key": p.change_key,
                    "subject": p.subject,
                    "url": p.url,
                    "score": p.score,
                    "confidence_pct": round(100 * p.score),
                    "features": p.features.as_dict(),
                }
                for p in predictions
            ],
            "timing_ms": timing_ms,
        }

    def score(self, body: dict[str, Any]) -> dict[str, Any]:
        try:
            a = change_from_dict(dict(body["a"]))
            b = change_from_dict(dict(body["b"]))
        except (KeyError, TypeError, RecordError) as exc:
            raise RequestError(400, f"malformed change record: {exc}") from None
        score, features = score_pair(a, b, self.model, self.provider, self.cache)
        return {"score": score, "features": features.as_dict()}

    @staticmethod
    def _int_param(body: dict[str, Any], name: str, default: int) -> int:
        value = body.get(name, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise RequestError(400, f"{name} must be an integer")
        return int(value)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    app: ServiceApp  # injected by create_server

    def log_message(self, format: str, *args: Any) -> None:
        logger.debug("%s %s", self.address_string(), format % args)

    def _cors_headers(self) -> list[tuple[str, str]]:
        origin = self.headers.get("Origin")
        if origin and origin in self.app.config.allowed_origins:
            return [
                ("Access-Control-Allow-Origin", origin),
                ("Access-Control-Allow-Headers", "Content-Type"),
                ("Access-Control-Allow-Methods", "GET, POST, OPTIONS"),
                ("Vary", "Origin"),
            ]
        return []

    def _send_json(self, status: int, payload: dict[str, Any]) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for name, value in self._cors_headers():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _read_json_body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw or b"{}")
        except json.JSONDecodeError:
            raise RequestError(400, "request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise RequestError(400, "request body must be a JSON object")
        return body

    def do_OPTIONS(self) -> None:  # noqa: N802 (http.server naming)
        self.send_response(204)
        self.send_header("Content-Length", "0")
        for name, value in self._cors_headers():
            self.send_header(name, value)
        self.end_headers()

    def do_GET(self) -> None:  # noqa: N802
        if self.path == "/health":
            self._send_json(200, self.app.health())
        else:
            self._send_json(404, {"error": f"no such endpoint: {self.path}"})

    def do_POST(self) -> None:  # noqa: N802
        try:
            body = self._read_json_body()
            if self.path == "/api/v1/predict":
                self._send_json(200, self.app.predict(body))
            elif self.path == "/api/v1/score":
                self._send_json(200, self.app.score(body))
            else:
                self._send_json(404, {"error": f"no such endpoint: {self.path}"})
        except RequestError as exc:
            self._send_json(exc.status, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive catch-all
            logger.exception("unhandled error serving %s", self.path)
            self._send_json(500, {"error": f"internal error: {type(exc).__name__}"})


def create_server(config: ServiceConfig) -> ThreadingHTTPServer:
    """Load the model and bind the listening socket.

    Raises if the model cannot be loaded: the service must never come up
    half-started.
    """
    app = ServiceApp(config)
    handler = type("BoundHandler", (_Handler,), {"app": app})
    server = ThreadingHTTPServer((config.listen_host, config.listen_port), handler)
    return server


def serve(config: ServiceConfig) -> None:
    server = create_server(config)
    host, port = server.server_address[:2]
    logger.info("listening on http://%s:%s", host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
