"""Tiny in-process HTTP endpoint mimicking a text-completion service.

Serves the two request shapes the toolkit speaks: continuation scoring
(request carries "continuations", response carries "logprobs") and plain
completion (request carries just "prompt", response carries "text"). Tests
and the extract command run against it; handlers are injectable.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def uniform_scorer(prompt: str, continuations: list[str]) -> list[float]:
    return [-1.0] * len(continuations)


def echo_completer(prompt: str) -> str:
    return "None"


class MockLmServer:
    """Ephemeral-port HTTP server; use as a context manager."""

    def __init__(self, scorer=uniform_scorer, completer=echo_completer,
                 fail_requests: int = 0, status_on_fail: int = 503):
        self.scorer = scorer
        self.completer = completer
        self.fail_requests = fail_requests
        self.status_on_fail = status_on_fail
        self.requests: list[dict] = []
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        assert self._server is not None, "server not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockLmServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                outer.requests.append(payload)
                if outer.fail_requests > 0:
                    outer.fail_requests -= 1
                    self.send_response(outer.status_on_fail)
                    self.end_headers()
                    return
                if "continuations" in payload:
                    body = {"logprobs": outer.scorer(payload.get("prompt", ""),
                                                     payload["continuations"])}
                else:
                    body = {"text": outer.completer(payload.get("prompt", ""))}
                data = json.dumps(body).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, fmt, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockLmServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
