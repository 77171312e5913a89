"""Minimal HTTP front end: POST /classify and GET /health.

Bodies are JSON. /classify accepts either a raw embedding
({"dim": N, "components": [...]}) or image bytes (any non-JSON content
type), which are embedded server-side with the reference embedder.
Malformed input gets a 4xx with a machine-readable reason; backend
failures get a 5xx. Requests are served concurrently, one thread each.
"""
from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import ProvenanceError, ValidationError
from .interchange import image_from_bytes, toy_embed
from .pipeline import Engine, vector_from_json_obj

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024 * 1024


class ProvenanceServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], engine: Engine):
        super().__init__(address, _Handler)
        self.engine = engine


class _Handler(BaseHTTPRequestHandler):
    server: ProvenanceServer

    def log_message(self, fmt, *args):  # route through logging, not stderr
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/health":
            self._send_json(404, {"error": "unknown path", "path": self.path})
            return
        try:
            self._send_json(200, self.server.engine.health())
        except Exception as e:
            log.exception("health check failed")
            self._send_json(500, {"error": str(e)})

    def do_POST(self):
        if self.path != "/classify":
            self._send_json(404, {"error": "unknown path", "path": self.path})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            if length <= 0 or length > MAX_BODY:
                self._send_json(400, {"error": f"bad Content-Length {length}"})
                return
            body = self.rfile.read(length)
            ctype = (self.headers.get("Content-Type") or "").split(";")[0].strip()
            if ctype == "application/json":
                try:
                    obj = json.loads(body)
                except json.JSONDecodeError as e:
                    self._send_json(400, {"error": f"malformed JSON: {e}"})
                    return
                vec, source_name = vector_from_json_obj(obj)
            else:
                vec = toy_embed(image_from_bytes(body))
                source_name = ""
            resp = self.server.engine.classify_vector(vec, source_name=source_name)
            self._send_json(200, resp.to_dict())
        except ValidationError as e:
            self._send_json(400, {"error": str(e)})
        except ProvenanceError as e:
            log.exception("classification backend failure")
            self._send_json(500, {"error": str(e)})
        except Exception as e:
            log.exception("unexpected failure")
            self._send_json(500, {"error": str(e)})


def make_server(engine: Engine, host: str = "127.0.0.1", port: int = 8031) -> ProvenanceServer:
    """Build (but do not start) the server; port 0 picks a free port."""
    return ProvenanceServer((host, port), engine)


def serve_forever(engine: Engine, host: str, port: int) -> None:
    server = make_server(engine, host, port)
    host_shown, port_shown = server.server_address[:2]
    log.info("serving on http://%s:%s (mode %s)", host_shown, port_shown, engine.mode.value)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
