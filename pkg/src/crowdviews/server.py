"""HTTP service presenting triplet comparison tasks to human annotators.

Endpoints:
  GET  /api/task?worker=ID   issue a task: three distinct random items.
  POST /api/answer           JSON {task_id, worker, choice: AB|AC|BC}.
  GET  /api/items/<id>       the rendered item as PNG.

Answers are appended to a triplet file (same format the simulator
writes): choice AB maps the task items (A, B, C) to the record
(A, B, C), AC to (A, C, B), BC to (B, C, A). Appends go through one
lock + flush per line, so the file is parseable at every instant.
Pending tasks live in memory only; a restart drops them while keeping
every persisted answer.
"""

from __future__ import annotations

import io
import json
import mimetypes
import random
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from .crowdsim import DatasetManifest, format_triplet_line, render_item
from .objective import TripletAnnotation

_CHOICE_SLOTS = {"AB": (0, 1, 2), "AC": (0, 2, 1), "BC": (1, 2, 0)}


class TaskServer:
    """State shared by all request handler threads."""

    def __init__(self, manifest: DatasetManifest, answers_path, seed=None, ui_dir=None):
        self.manifest = manifest
        self.records = {r.item_id: r for r in manifest.records}
        self.item_ids = [r.item_id for r in manifest.records]
        if len(self.item_ids) < 3:
            raise ValueError("manifest needs at least 3 items to form tasks")
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self._rng = random.Random(seed)
        self._png_cache: dict = {}
        self._pending: dict = {}
        self._registry_lock = threading.Lock()
        self._answers_lock = threading.Lock()
        self._answers = open(answers_path, "a", encoding="utf-8")

    def close(self):
        self._answers.close()

    def issue_task(self, worker: str) -> dict:
        with self._registry_lock:
            items = self._rng.sample(self.item_ids, 3)
            task_id = uuid.uuid4().hex
            self._pending[task_id] = (worker, tuple(items))
        return {
            "task_id": task_id,
            "items": items,
            "image_urls": [f"/api/items/{i}" for i in items],
        }

    def record_answer(self, task_id: str, worker: str, choice: str) -> None:
        """Raises KeyError if the task is unknown, consumed, or owned by a
        different worker; ValueError on a malformed choice."""
        if choice not in _CHOICE_SLOTS:
            raise ValueError(f"choice must be AB, AC or BC, got {choice!r}")
        with self._registry_lock:
            entry = self._pending.get(task_id)
            if entry is None or entry[0] != worker:
                raise KeyError(task_id)
            del self._pending[task_id]
        items = entry[1]
        a, b, c = _CHOICE_SLOTS[choice]
        record = TripletAnnotation(worker, items[a], items[b], items[c])
        with self._answers_lock:
            self._answers.write(format_triplet_line(record) + "\n")
            self._answers.flush()

    def image_bytes(self, item_id: str) -> bytes:
        cached = self._png_cache.get(item_id)
        if cached is not None:
            return cached
        record = self.records.get(item_id)
        if record is None:
            raise KeyError(item_id)
        pixels = render_item(self.manifest, record)
        img = Image.fromarray(np.round(pixels * 255).astype(np.uint8))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        data = buf.getvalue()
        self._png_cache[item_id] = data
        return data


def _valid_worker(worker) -> bool:
    return bool(worker) and not any(ch in worker for ch in "\t\n\r")


class _Handler(BaseHTTPRequestHandler):
    server_version = "crowdviews"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    @property
    def state(self) -> TaskServer:
        return self.server.state

    def _send_json(self, code: int, payload: dict):
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/api/task":
            worker = parse_qs(url.query).get("worker", [""])[0]
            if not _valid_worker(worker):
                self._send_json(400, {"error": "missing or malformed worker parameter"})
                return
            self._send_json(200, self.state.issue_task(worker))
            return
        if url.path.startswith("/api/items/"):
            item_id = url.path[len("/api/items/") :]
            try:
                data = self.state.image_bytes(item_id)
            except KeyError:
                self._send_json(404, {"error": f"unknown item {item_id}"})
                return
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return
        if self.state.ui_dir is not None:
            self._serve_static(url.path)
            return
        self._send_json(404, {"error": "not found"})

    def _serve_static(self, path: str):
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (self.state.ui_dir / rel).resolve()
        if not target.is_relative_to(self.state.ui_dir) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        data = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/api/answer":
            self._send_json(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            task_id = payload["task_id"]
            worker = payload["worker"]
            choice = payload["choice"]
        except (json.JSONDecodeError, KeyError, ValueError):
            self._send_json(400, {"error": "body must be JSON with task_id, worker, choice"})
            return
        if not _valid_worker(worker):
            self._send_json(400, {"error": "malformed worker id"})
            return
        try:
            self.state.record_answer(task_id, worker, choice)
        except ValueError as e:
            self._send_json(400, {"error": str(e)})
            return
        except KeyError:
            self._send_json(409, {"error": "task unknown, consumed, or not yours"})
            return
        self._send_json(200, {"ok": True})


def make_server(
    manifest: DatasetManifest, answers_path, port: int = 0, seed=None, ui_dir=None
) -> ThreadingHTTPServer:
    """Bound, ready-to-serve HTTP server; port 0 picks a free port."""
    state = TaskServer(manifest, answers_path, seed=seed, ui_dir=ui_dir)
    httpd = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    httpd.daemon_threads = True
    httpd.state = state
    return httpd
