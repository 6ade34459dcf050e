"""Snapshot-backed oracle server.

Speaks the oracle wire protocol (one JSON request line in, one JSON reply
line out, per connection round-trip) and answers from a recorded snapshot
store, keyed by fragment id and canonical inputs. This is the stand-in for
the source-language oracle process when no source toolchain is present;
deterministic fragments are indistinguishable through the wire.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading

from . import canonjson
from .snapshots import SnapshotStore

UNKNOWN_FRAGMENT = "UnknownFragment"
INPUT_DECODE_ERROR = "InputDecodeError"
NO_RECORDING = "NoRecordedCall"


class SnapshotOracle:
    """Lookup table from (fragment id, canonical inputs) to extended outputs."""

    def __init__(self, store: SnapshotStore):
        self.table: dict[tuple[str, str], tuple[list, bool, str]] = {}
        self.known: set[str] = set(store.by_fragment)
        for snap in store.all_snapshots():
            key = (snap.fragment_id, canonjson.dumps(list(snap.inputs)))
            self.table.setdefault(key, (list(snap.outputs), snap.err, snap.err_msg))

    def answer(self, request_line: str) -> str:
        try:
            req = json.loads(request_line)
            fid = req["id"]
            inputs = req["in"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            return canonjson.dumps(
                {"out": [], "err": {"flag": True, "msg": f"{INPUT_DECODE_ERROR}: {exc}"}}
            )
        if fid not in self.known:
            return canonjson.dumps(
                {"out": [], "err": {"flag": True, "msg": f"{UNKNOWN_FRAGMENT}: {fid}"}}
            )
        key = (fid, canonjson.dumps(inputs))
        hit = self.table.get(key)
        if hit is None:
            return canonjson.dumps(
                {"out": [], "err": {"flag": True, "msg": f"{NO_RECORDING}: {fid}"}}
            )
        outputs, err, msg = hit
        return canonjson.dumps({"out": outputs, "err": {"flag": err, "msg": msg}})


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline().decode("utf-8")
        if not line.strip():
            return
        reply = self.server.oracle.answer(line)
        self.wfile.write((reply + "\n").encode("utf-8"))


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class OracleServer:
    """Serve a SnapshotOracle on a local TCP port; use as a context manager."""

    def __init__(self, store: SnapshotStore, host: str = "127.0.0.1", port: int = 0):
        self.oracle = SnapshotOracle(store)
        self.server = _Server((host, port), _Handler)
        self.server.oracle = self.oracle
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def address(self) -> str:
        host, port = self.server.server_address
        return f"{host}:{port}"

    def __enter__(self) -> "OracleServer":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()


def query_oracle(address: str, fragment_id: str, inputs: list, timeout: float = 10.0) -> dict:
    """One request/reply round-trip against a running oracle."""
    host, _, port = address.rpartition(":")
    with socket.create_connection((host, int(port)), timeout=timeout) as conn:
        line = canonjson.dumps({"id": fragment_id, "in": inputs}) + "\n"
        conn.sendall(line.encode("utf-8"))
        buf = b""
        while not buf.endswith(b"\n"):
            chunk = conn.recv(65536)
            if not chunk:
                break
            buf += chunk
    return json.loads(buf.decode("utf-8"))
