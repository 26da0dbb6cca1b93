"""Newline-delimited JSON over TCP.

Each request line is ``{"op": ..., "request": {...}}``. Each reply line is
``{"ok": true, "result": {...}}`` or ``{"ok": false, "error": "..."}``.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading

from pydantic import ValidationError

from ..errors import PlannerError
from .core import PlannerService

log = logging.getLogger(__name__)

MAX_LINE = 1 << 20


def handle_line(service: PlannerService, line: str) -> dict:
    try:
        msg = json.loads(line)
        if not isinstance(msg, dict) or "op" not in msg:
            raise ValueError('expected an object with an "op" field')
        return {"ok": True, "result": service.dispatch(msg["op"], msg.get("request"))}
    except ValidationError as exc:
        return {"ok": False, "error": f"invalid request: {exc.errors(include_url=False)[0]['msg']}"}
    except (PlannerError, ValueError) as exc:
        return {"ok": False, "error": str(exc)}
    except Exception as exc:  # keep the connection usable
        log.exception("unhandled error")
        return {"ok": False, "error": f"internal error: {exc}"}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            if len(raw) > MAX_LINE:
                reply = {"ok": False, "error": "request line too long"}
            else:
                text = raw.decode("utf-8", errors="replace").strip()
                if not text:
                    continue
                reply = handle_line(self.server.service, text)
            self.wfile.write((json.dumps(reply) + "\n").encode("utf-8"))
            self.wfile.flush()


class LineServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, service: PlannerService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        super().__init__((host, port), _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, name="line-server", daemon=True)
        t.start()
        return t


class LineClient:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("r", encoding="utf-8")

    def call(self, op: str, request: dict | None = None) -> dict:
        self.sock.sendall((json.dumps({"op": op, "request": request or {}}) + "\n").encode("utf-8"))
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        reply = json.loads(line)
        if not reply.get("ok"):
            raise PlannerError(reply.get("error", "unknown error"))
        return reply["result"]

    def close(self):
        self.rfile.close()
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
