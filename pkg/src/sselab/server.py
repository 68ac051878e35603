"""The honest-but-curious CSP: executes searches by really opening files.

Search is the event source for the whole experiment: every matching
ciphertext file is opened and read through the kernel (unbuffered os.open /
os.read), the configured hook fires once per open, and BEGIN/END markers
bracket each query so traces can be correlated. Queries are globally
serialized so windows never interleave.
"""

from __future__ import annotations

import logging
import os
import socket
import socketserver
import threading
import time
from pathlib import Path

from .errors import ConfigError, ProtocolError
from .sse import (
    CiphertextDocument,
    LeakageRecord,
    OpKind,
    SearchToken,
    decode_posting_blob,
    require_token,
)
from .store import Store
from .trace import MarkerSink, OpenHook, QueryTraceWindow, format_marker
from . import wire

logger = logging.getLogger(__name__)


class SearchResponse:
    """Result of one query: ordered ciphertexts plus the leaked result size."""

    __slots__ = ("query_id", "ciphertexts", "result_size")

    def __init__(self, query_id: int, ciphertexts: tuple[CiphertextDocument, ...]) -> None:
        self.query_id = query_id
        self.ciphertexts = ciphertexts
        self.result_size = len(ciphertexts)


class SearchEngine:
    """Executes searches over a Store, one query at a time."""

    def __init__(
        self,
        store: Store,
        open_hook: OpenHook | None = None,
        marker_sink: MarkerSink | None = None,
    ) -> None:
        self.store = store
        self.open_hook = open_hook
        self.marker_sink = marker_sink
        self.windows: list[QueryTraceWindow] = []
        self.token_of: dict[int, SearchToken] = {}
        self.leakage_log: list[LeakageRecord] = []
        self._next_query_id = 1
        self._lock = threading.Lock()

    def _mark(self, query_id: int, kind: str, timestamp_ns: int) -> None:
        if self.marker_sink is not None:
            self.marker_sink(format_marker(query_id, kind, timestamp_ns))

    def _open_and_read(self, path: Path) -> bytes:
        # os.open/os.read keep every document access a real kernel syscall;
        # no userspace cache may swallow the open.
        fd = os.open(path, os.O_RDONLY)
        try:
            chunks = []
            while True:
                chunk = os.read(fd, 1 << 20)
                if not chunk:
                    return b"".join(chunks)
                chunks.append(chunk)
        finally:
            os.close(fd)

    def handle_search(self, token: SearchToken) -> SearchResponse:
        """Look up the token, open every matching ciphertext, return the blobs."""
        token = require_token(token)
        with self._lock:
            query_id = self._next_query_id
            self._next_query_id += 1
            begin_ns = time.monotonic_ns()
            self._mark(query_id, "BEGIN", begin_ns)

            blob = self.store.index.lookup(token)
            filenames = decode_posting_blob(token, blob) if blob is not None else []
            results: list[CiphertextDocument] = []
            for filename in sorted(filenames):
                path = self.store.document_path(filename)
                try:
                    data = self._open_and_read(path)
                except FileNotFoundError:
                    logger.error(
                        "integrity fault: posting references missing file %s", filename
                    )
                    continue
                if self.open_hook is not None:
                    self.open_hook(str(path))
                results.append(CiphertextDocument(filename, data))

            end_ns = max(time.monotonic_ns(), begin_ns + 1)
            self._mark(query_id, "END", end_ns)
            self.windows.append(QueryTraceWindow(query_id, begin_ns, end_ns))
            self.token_of[query_id] = token
            self.leakage_log.append(LeakageRecord(OpKind.SEARCH, len(results)))
            return SearchResponse(query_id, tuple(results))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        engine: SearchEngine = self.server.engine  # type: ignore[attr-defined]
        while True:
            try:
                frame = wire.recv_frame(self.rfile)
            except wire.UnrecoverableFrame as exc:
                self._send_error(f"unrecoverable frame: {exc}")
                return
            if frame is None:
                return
            msg_type, payload = frame
            if msg_type != wire.MSG_SEARCH:
                self._send_error(f"unknown message type 0x{msg_type:02x}")
                continue
            try:
                token = wire.decode_search(payload)
                response = engine.handle_search(token)
            except ProtocolError as exc:
                self._send_error(str(exc))
                continue
            except Exception as exc:  # keep the connection alive on server faults
                logger.exception("search failed")
                self._send_error(f"search failed: {exc}")
                continue
            wire.send_frame(
                self.wfile,
                wire.MSG_RESPONSE,
                wire.encode_response(response.query_id, response.ciphertexts),
            )

    def _send_error(self, message: str) -> None:
        try:
            wire.send_frame(self.wfile, wire.MSG_ERROR, wire.encode_error(message))
        except OSError:
            pass


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


if hasattr(socketserver, "ThreadingUnixStreamServer"):

    class _UnixServer(socketserver.ThreadingUnixStreamServer):
        daemon_threads = True


class CspServer:
    """Socket front end over a SearchEngine; accepts many connections but
    the engine lock keeps query execution strictly serial."""

    def __init__(
        self,
        store_dir: str | Path,
        endpoint: str = "tcp:127.0.0.1:0",
        open_hook: OpenHook | None = None,
        markers_path: str | Path | None = None,
    ) -> None:
        self.store = Store(store_dir)
        self._marker_file = None
        marker_sink: MarkerSink | None = None
        if markers_path is not None:
            self._marker_file = Path(markers_path).open("a", encoding="utf-8")

            def marker_sink(line: str) -> None:
                self._marker_file.write(line + "\n")
                self._marker_file.flush()

        self.engine = SearchEngine(self.store, open_hook=open_hook, marker_sink=marker_sink)
        kind, address = wire.parse_endpoint(endpoint)
        if kind == "unix":
            if "_UnixServer" not in globals():
                raise ConfigError("unix endpoints are not supported on this platform")
            path = Path(str(address))
            if path.exists():
                path.unlink()
            self._server = _UnixServer(str(path), _Handler)
            self.endpoint = f"unix:{path}"
        else:
            self._server = _TcpServer(address, _Handler)
            host, port = self._server.server_address[:2]
            self.endpoint = f"tcp:{host}:{port}"
        self._server.engine = self.engine  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        if self._marker_file is not None:
            self._marker_file.close()

    def __enter__(self) -> "CspServer":
        self.start()
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.shutdown()


class SearchClient:
    """Minimal client: send a token, get the matching ciphertexts back."""

    def __init__(self, endpoint: str) -> None:
        kind, address = wire.parse_endpoint(endpoint)
        if kind == "unix":
            self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self._sock.connect(str(address))
        else:
            self._sock = socket.create_connection(address)
        self._file = self._sock.makefile("rwb")

    def search(self, token: SearchToken) -> tuple[int, list[CiphertextDocument]]:
        wire.send_frame(self._file, wire.MSG_SEARCH, wire.encode_search(token))
        frame = wire.recv_frame(self._file)
        if frame is None:
            raise ProtocolError("connection closed before response")
        msg_type, payload = frame
        if msg_type == wire.MSG_ERROR:
            from .errors import ServerError

            raise ServerError(wire.decode_error(payload))
        if msg_type != wire.MSG_RESPONSE:
            raise ProtocolError(f"unexpected message type 0x{msg_type:02x}")
        return wire.decode_response(payload)

    def send_raw(self, msg_type: int, payload: bytes) -> tuple[int, bytes] | None:
        """Send an arbitrary frame and return the reply (for protocol tests)."""
        wire.send_frame(self._file, msg_type, payload)
        return wire.recv_frame(self._file)

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "SearchClient":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
