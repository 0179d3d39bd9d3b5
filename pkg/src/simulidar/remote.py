"""Client side of the denoiser wire protocol.

Transports carry whole frames over a byte stream: either the stdin/stdout
of a child process, or a TCP socket. One request is in flight at a time;
payloads round-trip as untouched IEEE-754 binary32.
"""

from __future__ import annotations

import shlex
import socket
import subprocess

import numpy as np

from . import sdnp
from .denoisers import DenoiserDescriptor
from .errors import ProtocolError, TransportError


class StdioTransport:
    """Frames over a child process's standard input/output."""

    def __init__(self, command: str | list[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise TransportError(f"failed to start {argv[0]!r}: {e}") from e

    def send(self, data: bytes) -> None:
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise TransportError(f"connection to child lost: {e}") from e

    def recv_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self._proc.stdout.read(n - len(buf))
            if not chunk:
                raise TransportError("child closed the stream mid-frame")
            buf += chunk
        return buf

    def close(self) -> None:
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait(timeout=10)


class TcpTransport:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise TransportError(f"cannot connect to {host}:{port}: {e}") from e

    def send(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as e:
            raise TransportError(f"connection lost: {e}") from e

    def recv_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except OSError as e:
                raise TransportError(f"connection lost: {e}") from e
            if not chunk:
                raise TransportError("peer closed the connection mid-frame")
            buf += chunk
        return buf

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def open_transport(endpoint: str):
    """Parse 'stdio:<command>' or 'tcp:<host>:<port>' endpoint strings."""
    if endpoint.startswith("stdio:"):
        return StdioTransport(endpoint[len("stdio:"):])
    if endpoint.startswith("tcp:"):
        rest = endpoint[len("tcp:"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp endpoint {endpoint!r}; expected tcp:host:port")
        return TcpTransport(host, int(port))
    raise ValueError(f"unknown endpoint scheme in {endpoint!r}")


class RemoteDenoiser:
    """Noise predictor backed by an external process speaking the wire protocol."""

    def __init__(self, transport, name: str = "remote"):
        self._transport = transport
        self._transport.send(sdnp.pack_handshake_request())
        info = sdnp.unpack_handshake_response(self._transport.recv_exact(sdnp.HANDSHAKE_RESP.size))
        if info.channels != 2:
            raise ProtocolError(f"endpoint serves {info.channels} channels, expected 2")
        if info.max_batch < 1:
            raise ProtocolError("endpoint advertises max_batch = 0")
        self.info = info
        self.descriptor = DenoiserDescriptor(
            name=name,
            expected_h=info.h,
            expected_w=info.w,
            channels=info.channels,
            accepts_batch=True,
            concurrent_safe=False,
        )

    def _roundtrip(self, batch: np.ndarray, t: int) -> np.ndarray:
        self._transport.send(sdnp.pack_predict_request(batch, t))
        first = self._transport.recv_exact(1)
        if first[0] == sdnp.TYPE_ERROR:
            rest = self._transport.recv_exact(sdnp.ERROR_HEADER.size - 1)
            _, code, msg_len = sdnp.ERROR_HEADER.unpack(first + rest)
            msg = self._transport.recv_exact(msg_len) if msg_len else b""
            raise ProtocolError(f"endpoint error {code}: {msg.decode('utf-8', 'replace')}")
        header = first + self._transport.recv_exact(sdnp.PREDICT_HEADER.size - 1)
        ftype, rt, rb, rh, rw, rc = sdnp.unpack_predict_header(header)
        if ftype != sdnp.TYPE_PREDICT_RESP:
            raise ProtocolError(f"unexpected frame type {ftype}")
        if (rb, rh, rw, rc) != batch.shape or rt != t:
            raise ProtocolError(
                f"response shape {(rb, rh, rw, rc)}@t={rt} does not match request {batch.shape}@t={t}"
            )
        payload = self._transport.recv_exact(sdnp.payload_size(rb, rh, rw, rc))
        return sdnp.payload_to_array(payload, rb, rh, rw, rc)

    def predict(self, batch: np.ndarray, t: int) -> np.ndarray:
        batch = np.ascontiguousarray(batch, dtype=np.float32)
        if batch.ndim != 4:
            raise ProtocolError(f"batch must be 4-D, got shape {batch.shape}")
        if (batch.shape[1], batch.shape[2]) != (self.info.h, self.info.w):
            raise ProtocolError(
                f"batch is {batch.shape[1]}x{batch.shape[2]}, endpoint expects {self.info.h}x{self.info.w}"
            )
        out = np.empty_like(batch)
        step = self.info.max_batch
        for lo in range(0, len(batch), step):
            out[lo : lo + step] = self._roundtrip(batch[lo : lo + step], t)
        return out

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def remote_denoise(x_batch: np.ndarray, t: int, endpoint: str) -> np.ndarray:
    """One-shot prediction through an endpoint string (see open_transport).

    Convenience wrapper; keep a RemoteDenoiser around instead when calling
    per sampling step, so the handshake happens once.
    """
    with RemoteDenoiser(open_transport(endpoint)) as den:
        return den.predict(np.asarray(x_batch, dtype=np.float32), t)
