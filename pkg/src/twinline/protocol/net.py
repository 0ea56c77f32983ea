"""TCP transport for the tag protocol.

The servers and clients themselves are transport-agnostic single-owner
objects; this layer pumps socket bytes into them under one lock per process,
which preserves the serialized-owner contract in the threaded topology.
"""

from __future__ import annotations

import socket
import socketserver
import threading
from typing import Callable

from .server import ServerSession, TagServer

RECV_SIZE = 65536


class TcpTagServer:
    """Hosts a TagServer (or the gateway's north side) on a real socket."""

    def __init__(
        self,
        host: str,
        port: int,
        lock: threading.RLock,
        accept: Callable[[str, Callable[[bytes], None]], ServerSession | None],
        receive: Callable[[ServerSession, bytes], None],
    ):
        self.lock = lock
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                sock: socket.socket = self.request
                sock.settimeout(1.0)
                send_lock = threading.Lock()

                def send_bytes(data: bytes):
                    try:
                        with send_lock:
                            sock.sendall(data)
                    except OSError:
                        pass

                with outer.lock:
                    session = accept(self.client_address[0], send_bytes)
                if session is None:
                    sock.close()
                    return
                try:
                    while not session.closed:
                        try:
                            data = sock.recv(RECV_SIZE)
                        except socket.timeout:
                            continue
                        except OSError:
                            break
                        if not data:
                            break
                        with outer.lock:
                            receive(session, data)
                finally:
                    with outer.lock:
                        session.closed = True

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self.server = Server((host, port), Handler)
        self.port = self.server.server_address[1]
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self.server.shutdown()
        self.server.server_close()


class TcpTagClient:
    """Connects a transport-agnostic client (TagClient, gateway south side)
    over TCP; received bytes are delivered under the process lock."""

    def __init__(self, host: str, port: int, lock: threading.RLock,
                 receive: Callable[[bytes], None]):
        self.lock = lock
        self.receive = receive
        self.sock = socket.create_connection((host, port), timeout=10.0)
        self.sock.settimeout(1.0)
        self._closed = threading.Event()
        self._send_lock = threading.Lock()
        self._thread = threading.Thread(target=self._reader, daemon=True)
        self._thread.start()

    def send_bytes(self, data: bytes):
        try:
            with self._send_lock:
                self.sock.sendall(data)
        except OSError:
            pass

    def _reader(self):
        while not self._closed.is_set():
            try:
                data = self.sock.recv(RECV_SIZE)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            with self.lock:
                self.receive(data)

    def close(self):
        self._closed.set()
        try:
            self.sock.close()
        except OSError:
            pass
