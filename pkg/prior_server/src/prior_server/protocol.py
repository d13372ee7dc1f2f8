"""Wire-protocol framing for the prior server (little-endian throughout).

Handshake: the client sends magic ``LPRI``, version u32=1, and the model id
as a u32-length-prefixed UTF-8 string; the server replies magic, version, and
the latent shape as four u32 ((0,0,0,0) means "same as input").  A rejected
handshake is answered with an error frame instead: status byte 0x01 followed
by a u32-length-prefixed UTF-8 message (the first byte disambiguates, since
the magic starts with 0x4C).

Request frame: opcode u8 (1 = consistency, 2 = eps-predict), timestep u32,
dims T,H,W,C as u32, then T*H*W*C float32 payload.  Response frame: status
u8 (0 = ok, 1 = error), then dims + payload on ok, or a u32-length-prefixed
message on error.  One request is in flight at a time; replies are written in
request order.
"""

from __future__ import annotations

import struct

MAGIC = b"LPRI"
VERSION = 1
OP_CONSISTENCY = 1
OP_EPS_PREDICT = 2
STATUS_OK = 0
STATUS_ERROR = 1

HEADER_FMT = "<BIIIII"           # opcode, timestep, T, H, W, C
HEADER_SIZE = struct.calcsize(HEADER_FMT)

# refuse frames larger than this many elements (256 Mi floats = 1 GiB)
MAX_ELEMENTS = 1 << 28


class FrameError(Exception):
    """Malformed but recoverable frame: reply with an error frame, continue."""


class TransportError(Exception):
    """Unrecoverable stream state (EOF mid-frame): reply if possible, stop."""


def read_exact(stream, n: int, what: str) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = stream.read(n - got)
        if not chunk:
            raise TransportError(f"stream closed reading {what}: expected {n} bytes, got {got}")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def error_frame(message: str) -> bytes:
    raw = message.encode("utf-8")
    return bytes([STATUS_ERROR]) + struct.pack("<I", len(raw)) + raw


def ok_frame(dims: tuple, payload: bytes) -> bytes:
    return bytes([STATUS_OK]) + struct.pack("<IIII", *dims) + payload


def handshake_reply(latent_shape: tuple = (0, 0, 0, 0)) -> bytes:
    return MAGIC + struct.pack("<I", VERSION) + struct.pack("<IIII", *latent_shape)


def read_handshake(stream) -> str:
    """Read and validate the client hello; returns the requested model id."""
    magic = read_exact(stream, 4, "handshake magic")
    if magic != MAGIC:
        raise FrameError(f"bad handshake magic {magic!r}")
    (version,) = struct.unpack("<I", read_exact(stream, 4, "handshake version"))
    if version != VERSION:
        raise FrameError(f"unsupported protocol version {version}")
    (idlen,) = struct.unpack("<I", read_exact(stream, 4, "model-id length"))
    if idlen > 4096:
        raise FrameError(f"model-id length {idlen} out of range")
    return read_exact(stream, idlen, "model id").decode("utf-8", errors="replace")


def read_request(stream):
    """Read one request frame; returns (opcode, timestep, dims, payload bytes).

    Raises FrameError for parseable-but-invalid frames (the payload has been
    consumed, so the connection stays usable) and TransportError when the
    stream dies mid-frame.
    """
    header = stream.read(HEADER_SIZE)
    if not header:
        return None  # clean EOF between frames
    if len(header) < HEADER_SIZE:
        raise TransportError(
            f"stream closed mid-header: expected {HEADER_SIZE} bytes, got {len(header)}")
    opcode, timestep, t, h, w, c = struct.unpack(HEADER_FMT, header)
    dims = (t, h, w, c)
    n = t * h * w * c
    if n == 0:
        raise FrameError(f"degenerate dims {dims}")
    if n > MAX_ELEMENTS:
        # cannot safely consume the payload; the connection is unrecoverable
        raise TransportError(f"frame of {n} elements exceeds limit {MAX_ELEMENTS}")
    payload = read_exact(stream, 4 * n, f"payload of {4 * n} bytes")
    if opcode not in (OP_CONSISTENCY, OP_EPS_PREDICT):
        raise FrameError(f"unknown opcode {opcode}")
    return opcode, timestep, dims, payload
