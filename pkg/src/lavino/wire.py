"""Client side of the external-prior wire protocol.

Little-endian framing over a companion process's stdin/stdout:

* handshake: client sends magic ``LPRI``, version u32=1, then the model id as
  a u32-length-prefixed UTF-8 string; the server replies magic, version, and
  the latent shape as four u32 values ((0,0,0,0) means "same as input").  A
  failing handshake is answered with an error frame instead (status byte 0x01
  plus a u32-length-prefixed message), distinguishable from the magic's 0x4C.
* request: opcode u8 (1 = consistency, 2 = eps-predict), timestep u32, dims
  T,H,W,C as u32, then T*H*W*C float32 payload.
* response: status u8 (0 = ok, 1 = error); ok is followed by dims + payload,
  error by a u32-length-prefixed UTF-8 message.

One request is in flight per connection; callers needing parallelism open
multiple connections.
"""

from __future__ import annotations

import os
import selectors
import shlex
import struct
import subprocess

import numpy as np

MAGIC = b"LPRI"
VERSION = 1
OP_CONSISTENCY = 1
OP_EPS_PREDICT = 2
STATUS_OK = 0
STATUS_ERROR = 1
DEFAULT_TIMEOUT = 300.0


class ProtocolError(RuntimeError):
    """Wire-protocol violation, handshake failure, timeout, or server exit."""


def pack_handshake_request(model_id: str) -> bytes:
    raw = model_id.encode("utf-8")
    return MAGIC + struct.pack("<I", VERSION) + struct.pack("<I", len(raw)) + raw


def pack_request(opcode: int, timestep: int, tensor: np.ndarray) -> bytes:
    t, h, w, c = tensor.shape
    header = struct.pack("<BIIIII", opcode, timestep, t, h, w, c)
    return header + np.ascontiguousarray(tensor, dtype="<f4").tobytes()


class PriorClient:
    """Spawns the companion process and round-trips tensors over its stdio."""

    def __init__(self, command_line: str, model_id: str, timeout: float = DEFAULT_TIMEOUT):
        self.command_line = command_line
        self.model_id = model_id
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                shlex.split(command_line), stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise ProtocolError(f"failed to start prior server {command_line!r}: {e}") from e
        # read the raw fd only (never the buffered wrapper), so select() sees
        # exactly what is pending
        self._out_fd = self.proc.stdout.fileno()
        self._sel = selectors.DefaultSelector()
        self._sel.register(self._out_fd, selectors.EVENT_READ)
        try:
            self.latent_shape = self._handshake()
        except Exception:
            self.close()
            raise

    def _handshake(self):
        self._write(pack_handshake_request(self.model_id))
        first = self._read_exact(1)
        if first == bytes([STATUS_ERROR]):
            msg = self._read_message()
            raise ProtocolError(f"handshake rejected: {msg}")
        rest = self._read_exact(len(MAGIC) - 1)
        if first + rest != MAGIC:
            raise ProtocolError(f"handshake: bad magic {(first + rest)!r}")
        (version,) = struct.unpack("<I", self._read_exact(4))
        if version != VERSION:
            raise ProtocolError(f"handshake: unsupported version {version}")
        shape = struct.unpack("<IIII", self._read_exact(16))
        return None if shape == (0, 0, 0, 0) else shape

    def call(self, opcode: int, tensor: np.ndarray, timestep: int) -> np.ndarray:
        tensor = np.asarray(tensor, dtype=np.float64)
        if tensor.ndim != 4:
            raise ValueError(f"wire tensors are 4-D, got shape {tensor.shape}")
        if self.latent_shape is not None and tuple(tensor.shape) != self.latent_shape:
            raise ProtocolError(
                f"latent shape mismatch: server declared {self.latent_shape}, "
                f"request has {tuple(tensor.shape)}")
        self._write(pack_request(opcode, timestep, tensor))
        status = self._read_exact(1)[0]
        if status == STATUS_ERROR:
            raise ProtocolError(f"server error: {self._read_message()}")
        if status != STATUS_OK:
            raise ProtocolError(f"bad response status byte {status:#04x}")
        dims = struct.unpack("<IIII", self._read_exact(16))
        expected = tuple(tensor.shape)
        if dims != expected:
            raise ProtocolError(f"response shape {dims} does not match request shape {expected}")
        n = int(np.prod(dims))
        payload = self._read_exact(4 * n, what=f"payload of {4 * n} bytes")
        out = np.frombuffer(payload, dtype="<f4", count=n).astype(np.float64)
        return out.reshape(dims)

    def consistency(self, z, t):
        return self.call(OP_CONSISTENCY, z, t)

    def eps_predict(self, z, t):
        return self.call(OP_EPS_PREDICT, z, t)

    def close(self):
        try:
            self._sel.close()
        except Exception:
            pass
        if self.proc.stdin:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=1)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _write(self, blob: bytes):
        if self.proc.poll() is not None:
            raise ProtocolError(f"prior server exited with code {self.proc.returncode}")
        try:
            self.proc.stdin.write(blob)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"prior server pipe closed while writing: {e}") from e

    def _read_exact(self, n: int, what: str | None = None) -> bytes:
        chunks = []
        got = 0
        while got < n:
            if not self._sel.select(self.timeout):
                raise ProtocolError(
                    f"timeout after {self.timeout}s waiting for "
                    f"{what or f'{n} bytes'} (received {got})")
            chunk = os.read(self._out_fd, n - got)
            if not chunk:
                raise ProtocolError(
                    f"prior server closed the stream: expected {n} bytes "
                    f"({what or 'frame data'}), got {got}")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def _read_message(self) -> str:
        (length,) = struct.unpack("<I", self._read_exact(4))
        return self._read_exact(length).decode("utf-8", errors="replace")
