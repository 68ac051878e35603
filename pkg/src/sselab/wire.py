"""Length-prefixed wire protocol between client and CSP.

Frame: 1-byte message type, 4-byte LE payload length, payload.
SEARCH payload: 16-byte token.
RESPONSE payload: 8-byte LE query id, 4-byte LE count, then per document
2-byte LE name length, name, 4-byte LE blob length, blob.
ERROR payload: UTF-8 message.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Sequence

from .errors import ConfigError, ProtocolError
from .sse import TOKEN_LENGTH, CiphertextDocument

MSG_SEARCH = 0x01
MSG_RESPONSE = 0x02
MSG_ERROR = 0x7F

# Desk-scale cap; a larger declared length means the stream cannot be trusted.
MAX_PAYLOAD = 64 * 1024 * 1024

_HEADER_LEN = struct.Struct("<I")
_QID = struct.Struct("<Q")
_COUNT = struct.Struct("<I")
_NAME_LEN = struct.Struct("<H")
_BLOB_LEN = struct.Struct("<I")


class UnrecoverableFrame(ProtocolError):
    """Framing is broken in a way that leaves no resync point."""


def send_frame(stream: BinaryIO, msg_type: int, payload: bytes) -> None:
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds frame cap")
    stream.write(bytes([msg_type]) + _HEADER_LEN.pack(len(payload)) + payload)
    stream.flush()


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = b""
    while len(chunks) < n:
        more = stream.read(n - len(chunks))
        if not more:
            raise UnrecoverableFrame(f"stream truncated: wanted {n} bytes, got {len(chunks)}")
        chunks += more
    return chunks


def recv_frame(stream: BinaryIO) -> tuple[int, bytes] | None:
    """Read one frame; returns None on clean EOF before a new frame."""
    first = stream.read(1)
    if not first:
        return None
    msg_type = first[0]
    (length,) = _HEADER_LEN.unpack(_read_exact(stream, _HEADER_LEN.size))
    if length > MAX_PAYLOAD:
        raise UnrecoverableFrame(f"declared payload length {length} exceeds frame cap")
    payload = _read_exact(stream, length)
    return msg_type, payload


def encode_search(token: bytes) -> bytes:
    if len(token) != TOKEN_LENGTH:
        raise ProtocolError(f"search token must be {TOKEN_LENGTH} bytes, got {len(token)}")
    return token


def decode_search(payload: bytes) -> bytes:
    if len(payload) != TOKEN_LENGTH:
        raise ProtocolError(f"SEARCH payload must be {TOKEN_LENGTH} bytes, got {len(payload)}")
    return payload


def encode_response(query_id: int, documents: Sequence[CiphertextDocument]) -> bytes:
    parts = [_QID.pack(query_id), _COUNT.pack(len(documents))]
    for doc in documents:
        name = doc.filename.encode("utf-8")
        if len(name) > 0xFFFF:
            raise ProtocolError(f"filename too long for wire format: {doc.filename!r}")
        parts.append(_NAME_LEN.pack(len(name)))
        parts.append(name)
        parts.append(_BLOB_LEN.pack(len(doc.blob)))
        parts.append(doc.blob)
    return b"".join(parts)


def decode_response(payload: bytes) -> tuple[int, list[CiphertextDocument]]:
    if len(payload) < _QID.size + _COUNT.size:
        raise ProtocolError("RESPONSE payload too short")
    (query_id,) = _QID.unpack_from(payload, 0)
    (count,) = _COUNT.unpack_from(payload, _QID.size)
    offset = _QID.size + _COUNT.size
    documents: list[CiphertextDocument] = []
    for _ in range(count):
        if offset + _NAME_LEN.size > len(payload):
            raise ProtocolError("RESPONSE truncated in name length")
        (name_len,) = _NAME_LEN.unpack_from(payload, offset)
        offset += _NAME_LEN.size
        if offset + name_len + _BLOB_LEN.size > len(payload):
            raise ProtocolError("RESPONSE truncated in name or blob length")
        name = payload[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (blob_len,) = _BLOB_LEN.unpack_from(payload, offset)
        offset += _BLOB_LEN.size
        if offset + blob_len > len(payload):
            raise ProtocolError("RESPONSE truncated in blob")
        documents.append(CiphertextDocument(name, payload[offset : offset + blob_len]))
        offset += blob_len
    if offset != len(payload):
        raise ProtocolError(f"RESPONSE has {len(payload) - offset} trailing bytes")
    return query_id, documents


def encode_error(message: str) -> bytes:
    return message.encode("utf-8")


def decode_error(payload: bytes) -> str:
    return payload.decode("utf-8", errors="replace")


def parse_endpoint(endpoint: str) -> tuple[str, object]:
    """Parse ``tcp:<host>:<port>`` or ``unix:<path>`` endpoint strings."""
    if endpoint.startswith("unix:"):
        path = endpoint[len("unix:") :]
        if not path:
            raise ConfigError("unix endpoint needs a socket path")
        return "unix", path
    if endpoint.startswith("tcp:"):
        rest = endpoint[len("tcp:") :]
        host, sep, port_text = rest.rpartition(":")
        if not sep or not host:
            raise ConfigError(f"tcp endpoint must be tcp:<host>:<port>, got {endpoint!r}")
        try:
            port = int(port_text)
        except ValueError as exc:
            raise ConfigError(f"invalid tcp port in {endpoint!r}") from exc
        return "tcp", (host, port)
    raise ConfigError(f"endpoint must start with tcp: or unix:, got {endpoint!r}")
