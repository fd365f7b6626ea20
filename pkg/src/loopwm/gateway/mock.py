"""Scripted HTTP mock for integration tests.

A script is an ordered list of rules; each incoming POST is answered by
the first live rule whose endpoint matches and whose matcher is a subset
of the request body (dicts match recursively on the keys they name;
scalars and arrays must be equal). Rules marked "once" are consumed on
use, which is how scripts express sequences like timeout-then-success.
Unmatched requests get a 404 echoing the request back.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from ..errors import LoopwmError

_log = logging.getLogger(__name__)

MOCK_FORMAT = "loopwm-mock-v1"


@dataclass
class MockRule:
    endpoint: str
    response: dict
    status: int = 200
    match: dict | None = None
    delay_ms: int = 0
    once: bool = False
    consumed: bool = field(default=False, init=False)


def subset_match(matcher, payload) -> bool:
    if isinstance(matcher, dict):
        if not isinstance(payload, dict):
            return False
        return all(k in payload and subset_match(v, payload[k]) for k, v in matcher.items())
    return matcher == payload


def load_mock_script(path: str | Path) -> list[MockRule]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoopwmError(f"cannot read mock script {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MOCK_FORMAT:
        raise LoopwmError(f"{path} is not a {MOCK_FORMAT} script")
    rules = []
    for i, row in enumerate(payload.get("rules", [])):
        try:
            rules.append(
                MockRule(
                    endpoint=row["endpoint"],
                    response=row["response"],
                    status=int(row.get("status", 200)),
                    match=row.get("match"),
                    delay_ms=int(row.get("delay_ms", 0)),
                    once=bool(row.get("once", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LoopwmError(f"{path}: malformed rule {i}: {exc}") from exc
    return rules


class MockServerHandle:
    """Running server plus the request log; stop() or use as a context manager."""

    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread):
        self._server = server
        self._thread = thread
        self.seen: list[dict] = server.seen  # aliased: grows as requests arrive

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockServerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        _log.debug("mock server: " + fmt, *args)

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        try:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        except (ConnectionError, BrokenPipeError):
            # the client gave up (e.g. scripted latency outlived its timeout)
            pass

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            self._reply(400, {"error": "request body is not valid JSON"})
            return
        server: ThreadingHTTPServer = self.server
        with server.lock:
            server.seen.append(
                {
                    "endpoint": self.path,
                    "payload": payload,
                    "authorization": self.headers.get("Authorization", ""),
                }
            )
            rule = None
            for candidate in server.rules:
                if candidate.consumed or candidate.endpoint != self.path:
                    continue
                if candidate.match is not None and not subset_match(candidate.match, payload):
                    continue
                rule = candidate
                if rule.once:
                    rule.consumed = True
                break
        if rule is None:
            self._reply(404, {"error": "no matching rule", "request": payload})
            return
        if rule.delay_ms > 0:
            time.sleep(rule.delay_ms / 1000.0)
        self._reply(rule.status, rule.response)


def run_mock_server(script: str | Path | list[MockRule], port: int = 0) -> MockServerHandle:
    """Serve the script on 127.0.0.1; port 0 picks a free one."""
    rules = script if isinstance(script, list) else load_mock_script(script)
    try:
        server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    except OSError as exc:
        raise LoopwmError(f"cannot bind mock server to port {port}: {exc}") from exc
    server.rules = rules
    server.lock = threading.Lock()
    server.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return MockServerHandle(server, thread)
