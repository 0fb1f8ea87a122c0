"""Read-only HTTP server for a rendered report directory.

Serves the report JSON, per-scene records, pre-rendered heatmap PNGs
and the static dashboard assets. All state is loaded once at startup
and never mutated, so concurrent requests are safe and identical
requests return identical bytes.

    GET /api/report                          full report
    GET /api/scenes                          per-scene summaries
    GET /api/scene/{id}                      one scene record
    GET /api/scene/{id}/heatmap/{metric}.png grayscale heatmap
    GET /{asset}                             static dashboard files
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .errors import DataError
from .report import load_report, report_to_bytes
from .uncertainty import METRIC_NAMES

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".map": "application/json",
    ".ico": "image/x-icon",
}


class ReportState:
    """Everything the handlers read: loaded once, immutable after."""

    def __init__(self, report_dir: str | Path, static_dir: Optional[str | Path] = None):
        self.report_dir = Path(report_dir)
        report_path = self.report_dir / "report.json"
        if not report_path.exists():
            raise DataError(f"no report.json under {self.report_dir}")
        self.report = load_report(report_path)
        self.report_bytes = report_to_bytes(self.report)
        self.scenes = {s["scene_id"]: s for s in self.report["scenes"]}
        self.heatmap_dir = self.report_dir / "heatmaps"
        self.static_dir = Path(static_dir) if static_dir is not None else None

    def scene_summaries(self) -> list[dict]:
        return [
            {
                "scene_id": s["scene_id"],
                "scores": s["scores"],
                "f1": s["metrics"]["f1"],
                "flags": s["flags"],
            }
            for s in self.report["scenes"]
        ]


class _Handler(BaseHTTPRequestHandler):
    state: ReportState  # injected by make_server

    # quiet by default; tests and the CLI don't want per-request noise
    def log_message(self, fmt, *args):  # noqa: A002 - stdlib signature
        pass

    def _send(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self._send(status, "application/json; charset=utf-8", body)

    def _not_found(self, what: str) -> None:
        self._send_json(404, {"error": f"{what} not found"})

    def do_GET(self):  # noqa: N802 - stdlib signature
        path = self.path.split("?", 1)[0]
        if path == "/api/report":
            self._send(200, "application/json; charset=utf-8", self.state.report_bytes)
        elif path == "/api/scenes":
            self._send_json(200, self.state.scene_summaries())
        elif path.startswith("/api/scene/"):
            self._scene_route(path[len("/api/scene/") :])
        elif path.startswith("/api/"):
            self._not_found("endpoint")
        else:
            self._static_route(path)

    def _scene_route(self, rest: str) -> None:
        parts = [p for p in rest.split("/") if p]
        if len(parts) == 1:
            scene = self.state.scenes.get(parts[0])
            if scene is None:
                self._not_found("scene")
                return
            self._send_json(200, scene)
        elif len(parts) == 3 and parts[1] == "heatmap" and parts[2].endswith(".png"):
            scene_id = parts[0]
            metric = parts[2][: -len(".png")]
            if scene_id not in self.state.scenes or metric not in METRIC_NAMES:
                self._not_found("heatmap")
                return
            png_path = self.state.heatmap_dir / scene_id / f"{metric}.png"
            if not png_path.exists():
                self._not_found("heatmap")
                return
            self._send(200, "image/png", png_path.read_bytes())
        else:
            self._not_found("endpoint")

    def _static_route(self, path: str) -> None:
        if self.state.static_dir is None:
            self._not_found("asset")
            return
        rel = path.lstrip("/") or "index.html"
        root = self.state.static_dir.resolve()
        target = (root / rel).resolve()
        # refuse anything that escapes the asset root
        if root not in target.parents and target != root:
            self._not_found("asset")
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._not_found("asset")
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send(200, ctype, target.read_bytes())


def make_server(
    report_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8000,
    static_dir: Optional[str | Path] = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the server; call serve_forever() on the
    result, or shutdown() from another thread to stop it."""
    state = ReportState(report_dir, static_dir)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)
