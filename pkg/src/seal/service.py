"""HTTP annotation service over a frozen model bundle.

``POST /annotate`` with ``{"text": string}`` returns the pipeline's
AnnotationResult as JSON; ``GET /health`` answers "ok"; ``GET /demo``
serves a static page that posts to /annotate and color-codes the spans
(green/orange/blue for Process/Material/Task).  The model is loaded once
and never mutated, so identical requests get byte-identical responses.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .pipeline import Annotator, annotate

__all__ = ["make_server", "DEMO_HTML"]

logger = logging.getLogger(__name__)

_CLASS_COLORS = {"Process": "#b6f0b6", "Material": "#ffd9a0", "Task": "#b9d6ff"}

DEMO_HTML = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>Keyphrase annotation demo</title>
<style>
  body { font-family: sans-serif; max-width: 50em; margin: 2em auto; }
  textarea { width: 100%; height: 10em; }
  .Process { background: #b6f0b6; }
  .Material { background: #ffd9a0; }
  .Task { background: #b9d6ff; }
  .legend span { padding: 0 0.5em; margin-right: 1em; }
  #result { margin-top: 1em; line-height: 1.6; white-space: pre-wrap; }
</style>
</head>
<body>
<h1>Keyphrase annotation</h1>
<p class="legend">
  <span class="Process">Process</span>
  <span class="Material">Material</span>
  <span class="Task">Task</span>
</p>
<textarea id="text" placeholder="Paste an abstract here"></textarea>
<p><button onclick="run()">Annotate</button></p>
<div id="result"></div>
<script>
async function run() {
  const text = document.getElementById("text").value;
  const resp = await fetch("/annotate", {
    method: "POST",
    headers: {"Content-Type": "application/json"},
    body: JSON.stringify({text: text}),
  });
  const data = await resp.json();
  const out = document.getElementById("result");
  out.textContent = "";
  if (!resp.ok) { out.textContent = "error: " + data.error; return; }
  let pos = 0;
  for (const span of data.spans) {
    out.appendChild(document.createTextNode(text.slice(pos, span.start)));
    const mark = document.createElement("span");
    mark.className = span["class"];
    mark.title = span["class"];
    mark.textContent = text.slice(span.start, span.end);
    out.appendChild(mark);
    pos = span.end;
  }
  out.appendChild(document.createTextNode(text.slice(pos)));
}
</script>
</body>
</html>
"""


def _json_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    annotator: Annotator  # set by make_server on the subclass

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _reply(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _reply_json(self, status: int, payload: dict) -> None:
        self._reply(status, _json_bytes(payload), "application/json; charset=utf-8")

    def do_GET(self) -> None:
        if self.path == "/health":
            self._reply(200, b"ok", "text/plain; charset=utf-8")
        elif self.path == "/demo":
            self._reply(200, DEMO_HTML.encode("utf-8"), "text/html; charset=utf-8")
        else:
            self._reply_json(404, {"error": f"no such path {self.path}"})

    def do_POST(self) -> None:
        if self.path != "/annotate":
            self._reply_json(404, {"error": f"no such path {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._reply_json(400, {"error": "bad Content-Length"})
            return
        body = self.rfile.read(length)
        try:
            payload = json.loads(body)
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._reply_json(400, {"error": "request body is not valid JSON"})
            return
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            self._reply_json(400, {"error": 'expected {"text": string}'})
            return
        result = annotate(self.annotator, payload["text"])
        self._reply_json(200, result.to_dict())


class _Server(ThreadingHTTPServer):
    # Annotation takes a while per request, so bursts of concurrent clients
    # pile up in the accept queue; the socketserver default of 5 drops (and
    # on Linux resets) connections under load.
    request_queue_size = 128


def make_server(annotator: Annotator, port: int, host: str = "127.0.0.1") -> _Server:
    """Bind a threading HTTP server; raises OSError if the port is taken."""

    class BoundHandler(_Handler):
        pass

    BoundHandler.annotator = annotator
    return _Server((host, port), BoundHandler)
