"""Client side of the environment wire protocol.

Speaks newline-delimited JSON over either a spawned `uavris serve`
subprocess (stdio) or a TCP connection.  Ids increase strictly; every
request waits for the response carrying the same id.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys

import numpy as np


class BridgeError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class _StdioTransport:
    def __init__(self, config_path: str | None):
        cmd = [sys.executable, "-m", "uavris.cli", "serve",
               "--transport", "stdio"]
        if config_path:
            cmd += ["--config", config_path]
        self.proc = subprocess.Popen(cmd, stdin=subprocess.PIPE,
                                     stdout=subprocess.PIPE)

    def send_line(self, line: str) -> None:
        self.proc.stdin.write((line + "\n").encode("utf-8"))
        self.proc.stdin.flush()

    def recv_line(self) -> str:
        raw = self.proc.stdout.readline()
        if not raw:
            raise ConnectionError("environment service closed the stream")
        return raw.decode("utf-8")

    def close(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        self.proc.wait(timeout=30)
        self.proc.stdout.close()


class _TcpTransport:
    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port), timeout=60)
        self.reader = self.sock.makefile("r", encoding="utf-8")

    def send_line(self, line: str) -> None:
        self.sock.sendall((line + "\n").encode("utf-8"))

    def recv_line(self) -> str:
        raw = self.reader.readline()
        if not raw:
            raise ConnectionError("environment service closed the connection")
        return raw

    def close(self) -> None:
        try:
            self.reader.close()
            self.sock.close()
        except OSError:
            pass


class BridgeClient:
    """One session against the environment service."""

    def __init__(self, endpoint: str = "subprocess",
                 config_path: str | None = None):
        if endpoint == "subprocess":
            self.transport = _StdioTransport(config_path)
        elif endpoint.startswith("tcp:"):
            _, host, port = endpoint.split(":")
            self.transport = _TcpTransport(host, int(port))
        else:
            raise ValueError(f"unknown endpoint {endpoint!r}")
        self._next_id = 0

    def request(self, kind: str, **payload) -> dict:
        msg = {"kind": kind, "id": self._next_id}
        msg.update(payload)
        self._next_id += 1
        self.transport.send_line(json.dumps(msg, separators=(",", ":")))
        reply = json.loads(self.transport.recv_line())
        if reply.get("id") != msg["id"]:
            raise BridgeError("bad-id", f"response id {reply.get('id')} "
                                        f"for request {msg['id']}")
        if reply.get("kind") == "error":
            raise BridgeError(reply.get("code", "unknown"),
                              reply.get("message", ""))
        return reply

    def hello(self) -> dict:
        return self.request("hello")

    def reset(self, seed: int) -> np.ndarray:
        reply = self.request("reset", seed=int(seed))
        return np.asarray(reply["obs"], dtype=np.float32)

    def step(self, action: np.ndarray):
        reply = self.request("step", action=[float(a) for a in action])
        return (np.asarray(reply["obs"], dtype=np.float32),
                float(reply["reward"]), bool(reply["done"]), reply["info"])

    def close(self) -> None:
        try:
            self.request("close")
        except (BridgeError, ConnectionError):
            pass
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
