"""Labelling service: serves unlabeled images over HTTP, one at a time.

Built for a single researcher working through a directory, so there is no
auth and no multi-user queue. All manifest writes funnel through one lock
and hit disk via the atomic whole-file rewrite in `imageio.write_manifest`;
a crash mid-label leaves either the old or the new manifest, never a torn
one. Images go to the browser as base64 BMP data URIs because BMP is the
one raster format writable in a few lines that every browser renders.
"""

from __future__ import annotations

import base64
import json
import os
import struct
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .imageio import (
    MANIFEST_NAME,
    GrayImage,
    RgbImage,
    load_manifest,
    read_image,
    write_manifest,
)


class LabelRejected(Exception):
    """Validation failure carrying the HTTP status it maps to."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def bmp_bytes(img: GrayImage | RgbImage) -> bytes:
    """Encode as uncompressed 24-bit BMP (bottom-up rows, BGR, 4-byte row
    alignment)."""
    data = img.data
    if data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    h, w = data.shape[:2]
    stride = (w * 3 + 3) & ~3
    rows = np.zeros((h, stride), dtype=np.uint8)
    rows[:, : w * 3] = data[::-1, :, ::-1].reshape(h, w * 3)
    payload = rows.tobytes()
    header = struct.pack("<2sIHHI", b"BM", 14 + 40 + len(payload), 0, 0, 14 + 40)
    info = struct.pack(
        "<IiiHHIIiiII", 40, w, h, 1, 24, 0, len(payload), 2835, 2835, 0, 0
    )
    return header + info + payload


def image_data_uri(img: GrayImage | RgbImage) -> str:
    return "data:image/bmp;base64," + base64.b64encode(bmp_bytes(img)).decode("ascii")


class LabelSession:
    """Cursor over the unlabeled records of one dataset directory.

    Progress is session-scoped: `total` is the number of unlabeled records
    found at startup and `labeled` counts how many of those have been
    labelled since, so the bar runs 0/n to n/n regardless of how many
    records were already labelled before the session.
    """

    def __init__(self, dataset_dir, charset: str, length: int = 0):
        if not charset:
            raise ValueError("charset must be non-empty")
        if len(set(charset)) != len(charset):
            raise ValueError("charset contains duplicate characters")
        if length < 0:
            raise ValueError(f"length must be >= 0 (0 = free length), got {length}")
        self.dataset_dir = dataset_dir
        self.charset = charset
        self.length = length
        manifest_path = os.path.join(dataset_dir, MANIFEST_NAME)
        if not os.path.exists(manifest_path):
            raise FileNotFoundError(f"no {MANIFEST_NAME} in {dataset_dir}")
        self._manifest_path = manifest_path
        self._manifest = load_manifest(manifest_path)
        self._by_id = {r.file: r for r in self._manifest.records}
        self._queue = deque(r.file for r in self._manifest.by_split("unlabeled"))
        self.total = len(self._queue)
        self.labeled = 0
        self._lock = threading.Lock()

    def next_item(self) -> dict:
        with self._lock:
            if not self._queue:
                return {"done": True}
            rec_id = self._queue[0]
            remaining = len(self._queue)
        img = read_image(os.path.join(self.dataset_dir, rec_id))
        return {"id": rec_id, "image": image_data_uri(img), "remaining": remaining}

    def _validate_label(self, label: str) -> None:
        if not label:
            raise LabelRejected(400, "empty label")
        bad = []
        for ch in label:
            if ch not in self.charset and ch not in bad:
                bad.append(ch)
        if bad:
            if len(bad) == 1:
                raise LabelRejected(400, f"invalid character {bad[0]!r}")
            listed = ", ".join(repr(ch) for ch in bad)
            raise LabelRejected(400, f"invalid characters {listed}")
        if self.length and len(label) != self.length:
            raise LabelRejected(
                400, f"expected {self.length} characters, got {len(label)}"
            )

    def submit(self, rec_id: str, label: str) -> dict:
        """Validate and persist one label; the record's split flips to
        "train". Resubmitting the same (id, label) succeeds without a second
        write; a different label for an already-labelled id is a conflict."""
        with self._lock:
            rec = self._by_id.get(rec_id)
            if rec is None:
                raise LabelRejected(404, f"unknown id {rec_id!r}")
            self._validate_label(label)
            if rec.split != "unlabeled":
                if rec.label == label:
                    return {"ok": True}
                raise LabelRejected(
                    409, f"{rec_id!r} already labelled {rec.label!r}"
                )
            rec.label = label
            rec.split = "train"
            write_manifest(self._manifest, self._manifest_path)
            self._queue.remove(rec_id)
            self.labeled += 1
            return {"ok": True}

    def skip(self, rec_id: str) -> dict:
        """Rotate the record to the back of the queue; nothing persists, so
        a restart sees the original order."""
        with self._lock:
            if rec_id not in self._queue:
                raise LabelRejected(404, f"unknown or already labelled id {rec_id!r}")
            self._queue.remove(rec_id)
            self._queue.append(rec_id)
            return {"ok": True, "next": self._queue[0]}

    def progress(self) -> dict:
        return {"labeled": self.labeled, "total": self.total}


FALLBACK_PAGE = """<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>labeller</title></head>
<body style="font-family: sans-serif; max-width: 40em; margin: 2em auto">
<div id="progress"></div>
<img id="captcha" style="image-rendering: pixelated; min-height: 2em">
<div><input id="entry" autofocus autocomplete="off">
<span id="error" style="color: #b00"></span></div>
<p>Enter submits, Esc skips.</p>
<script>
let current = null;
const $ = (id) => document.getElementById(id);
async function refresh() {
  const p = await (await fetch("/api/progress")).json();
  $("progress").textContent = p.labeled + "/" + p.total;
  const n = await (await fetch("/api/next")).json();
  if (n.done) { document.body.textContent = "All labelled."; return; }
  current = n.id;
  $("captcha").src = n.image;
}
$("entry").addEventListener("keydown", async (ev) => {
  if (ev.key === "Escape" && current) {
    await fetch("/api/skip", {method: "POST", body: JSON.stringify({id: current})});
    $("error").textContent = "";
    refresh();
  }
  if (ev.key !== "Enter" || !current || !$("entry").value) return;
  const r = await fetch("/api/label", {
    method: "POST",
    body: JSON.stringify({id: current, label: $("entry").value}),
  });
  if (r.ok) { $("entry").value = ""; $("error").textContent = ""; refresh(); }
  else { $("error").textContent = (await r.json()).error; }
});
refresh();
</script></body></html>
"""

STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
}


class _Handler(BaseHTTPRequestHandler):
    session: LabelSession
    ui_dir: str | None

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        try:
            n = int(self.headers.get("Content-Length", "0"))
            obj = json.loads(self.rfile.read(n).decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as e:
            raise LabelRejected(400, f"bad request body: {e}") from e
        if not isinstance(obj, dict):
            raise LabelRejected(400, "request body must be a JSON object")
        return obj

    def _field(self, obj: dict, name: str) -> str:
        value = obj.get(name)
        if not isinstance(value, str):
            raise LabelRejected(400, f"missing or non-string field {name!r}")
        return value

    def _serve_static(self, path: str) -> None:
        if path == "/":
            path = "/index.html"
        if self.ui_dir is None:
            if path == "/index.html":
                body = FALLBACK_PAGE.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            self._send_json(404, {"error": f"no such path {path!r}"})
            return
        root = os.path.realpath(self.ui_dir)
        full = os.path.realpath(os.path.join(root, path.lstrip("/")))
        if not full.startswith(root + os.sep) or not os.path.isfile(full):
            self._send_json(404, {"error": f"no such path {path!r}"})
            return
        ctype = STATIC_TYPES.get(
            os.path.splitext(full)[1], "application/octet-stream"
        )
        with open(full, "rb") as f:
            body = f.read()
        if full.endswith(".html"):
            # hand the UI the validation rule it mirrors client-side
            cfg = json.dumps(
                {"charset": self.session.charset, "length": self.session.length}
            )
            body = body.replace(b"__LABELLER_CONFIG__", cfg.encode("utf-8"))
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        try:
            if self.path == "/api/next":
                self._send_json(200, self.session.next_item())
            elif self.path == "/api/progress":
                self._send_json(200, self.session.progress())
            elif self.path.startswith("/api/"):
                self._send_json(404, {"error": f"no such endpoint {self.path!r}"})
            else:
                self._serve_static(self.path.split("?", 1)[0])
        except LabelRejected as e:
            self._send_json(e.status, {"error": e.message})
        except Exception as e:  # keep the server up for the next request
            self._send_json(500, {"error": f"{type(e).__name__}: {e}"})

    def do_POST(self):
        try:
            if self.path == "/api/label":
                obj = self._read_body()
                result = self.session.submit(
                    self._field(obj, "id"), self._field(obj, "label")
                )
                self._send_json(200, result)
            elif self.path == "/api/skip":
                obj = self._read_body()
                self._send_json(200, self.session.skip(self._field(obj, "id")))
            else:
                self._send_json(404, {"error": f"no such endpoint {self.path!r}"})
        except LabelRejected as e:
            self._send_json(e.status, {"error": e.message})
        except Exception as e:
            self._send_json(500, {"error": f"{type(e).__name__}: {e}"})


def make_server(
    dataset_dir,
    charset: str,
    length: int = 0,
    port: int = 0,
    ui_dir: str | None = None,
) -> ThreadingHTTPServer:
    """Bind (port 0 = ephemeral) without starting the accept loop, so tests
    and `serve` share one construction path. A busy port raises OSError
    here, before any request is handled."""
    session = LabelSession(dataset_dir, charset, length)
    handler = type(
        "SessionHandler", (_Handler,), {"session": session, "ui_dir": ui_dir}
    )
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.daemon_threads = True
    return server


def serve(
    dataset_dir,
    charset: str,
    length: int = 0,
    port: int = 8000,
    ui_dir: str | None = None,
) -> None:
    server = make_server(dataset_dir, charset, length, port, ui_dir)
    host, bound_port = server.server_address
    print(f"labelling {dataset_dir} at http://{host}:{bound_port}/", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
