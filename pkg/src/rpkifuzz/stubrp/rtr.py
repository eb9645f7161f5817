"""Stub RTR cache server for probe tests.

Speaks just enough RTR v1 to answer a Reset Query with Cache Response and End
of Data.  A configurable declared-length limit simulates the fixed-slot
behavior: a PDU announcing more than the slot fits kills the connection (and
optionally the server), which is what the probe harness needs to observe.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading

RTR_VERSION = 1
PDU_SERIAL_NOTIFY = 0
PDU_RESET_QUERY = 2
PDU_CACHE_RESPONSE = 3
PDU_END_OF_DATA = 7
PDU_ERROR_REPORT = 10


class _RtrHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: StubRtrServer = self.server  # type: ignore[assignment]
        sock: socket.socket = self.request
        sock.settimeout(5)
        try:
            header = self._read_exact(sock, 8)
            if header is None:
                return
            version, pdu_type, session, length = struct.unpack(">BBHI", header)
            if server.die_on_oversize is not None and length > server.die_on_oversize:
                # fixed-slot overflow: kill the connection abruptly, then the server
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER, struct.pack("ii", 1, 0))
                sock.close()
                server.crashed.set()
                threading.Thread(target=server.shutdown, daemon=True).start()
                return
            if pdu_type == PDU_RESET_QUERY:
                sock.sendall(struct.pack(">BBHI", RTR_VERSION, PDU_CACHE_RESPONSE, server.session_id, 8))
                # End of Data v1: serial + refresh/retry/expire timers
                sock.sendall(
                    struct.pack(">BBHIIIII", RTR_VERSION, PDU_END_OF_DATA, server.session_id, 24, 0, 3600, 600, 7200)
                )
            else:
                body = b"unsupported PDU"
                sock.sendall(
                    struct.pack(">BBHI", RTR_VERSION, PDU_ERROR_REPORT, 0, 16 + len(body))
                    + struct.pack(">II", 0, len(body))
                    + body
                )
        except (OSError, struct.error):
            pass

    @staticmethod
    def _read_exact(sock: socket.socket, n: int) -> bytes | None:
        buf = b""
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return buf


class StubRtrServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0, die_on_oversize: int | None = None):
        super().__init__((host, port), _RtrHandler)
        self.die_on_oversize = die_on_oversize
        self.session_id = 7
        self.crashed = threading.Event()
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self.server_address[1]

    def close(self):
        try:
            self.shutdown()
        except Exception:
            pass
        self.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
