"""Edge/server wire protocol: length-prefixed JSON frames and the TCP client.

A frame is a 4-byte big-endian payload length followed by UTF-8 JSON text.
Payloads above 16 MiB are rejected on both sides.  The client sends one
request at a time per connection; a connect-level failure is retried exactly
once, a timeout is surfaced immediately.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass, field
from typing import Callable

MAX_PAYLOAD_BYTES = 16 * 1024 * 1024
PROTOCOL_VERSION = 1
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 7601
REQUEST_KINDS = ("scene", "objects", "ocr", "health")


class ProtocolError(Exception):
    """Base class for wire-level failures."""


class Oversize(ProtocolError):
    pass


class Eof(ProtocolError):
    pass


class BadUtf8(ProtocolError):
    pass


class Timeout(ProtocolError):
    pass


class ConnectionFailed(ProtocolError):
    pass


class ProtocolViolation(ProtocolError):
    pass


class SchemaError(ProtocolError):
    """Message text parsed as JSON but does not match the message schema."""


def encode_frame(payload: str) -> bytes:
    data = payload.encode("utf-8")
    if len(data) > MAX_PAYLOAD_BYTES:
        raise Oversize(f"payload of {len(data)} bytes exceeds {MAX_PAYLOAD_BYTES}")
    return struct.pack(">I", len(data)) + data


def _read_exact(read: Callable[[int], bytes], count: int) -> bytes:
    buf = bytearray()
    while len(buf) < count:
        chunk = read(count - len(buf))
        if not chunk:
            raise Eof(f"stream ended after {len(buf)} of {count} bytes")
        buf.extend(chunk)
    return bytes(buf)


def decode_frame(read: Callable[[int], bytes]) -> str:
    """Read one frame from ``read(n)`` (returns at most n bytes, b'' at EOF).

    Partial reads are buffered, so arbitrary chunking decodes identically
    to single-chunk delivery.
    """
    header = _read_exact(read, 4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_PAYLOAD_BYTES:
        raise Oversize(f"declared length {length} exceeds {MAX_PAYLOAD_BYTES}")
    payload = _read_exact(read, length)
    try:
        return payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadUtf8(str(exc)) from exc


@dataclass(frozen=True)
class PerceptionRequest:
    id: str
    kind: str
    image: str | None = None  # base64 of canonical PGM bytes; absent for health
    params: dict = field(default_factory=dict)
    v: int = PROTOCOL_VERSION

    def __post_init__(self) -> None:
        if self.v != PROTOCOL_VERSION:
            raise SchemaError(f"unsupported protocol version {self.v}")
        if not isinstance(self.id, str) or not self.id:
            raise SchemaError("request id must be a non-empty string")
        if self.kind not in REQUEST_KINDS:
            raise SchemaError(f"unknown request kind {self.kind!r}")
        if self.kind == "health" and self.image is not None:
            raise SchemaError("health requests carry no image")
        if self.image is not None and not isinstance(self.image, str):
            raise SchemaError("image must be a base64 string")
        if not isinstance(self.params, dict) or any(
            not isinstance(k, str) or not isinstance(v, str)
            for k, v in self.params.items()
        ):
            raise SchemaError("params must map strings to strings")

    def to_json(self) -> str:
        doc = {"v": self.v, "id": self.id, "kind": self.kind, "params": self.params}
        if self.image is not None:
            doc["image"] = self.image
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "PerceptionRequest":
        doc = _load_object(text)
        extra = set(doc) - {"v", "id", "kind", "image", "params"}
        if extra:
            raise SchemaError(f"unknown request fields: {sorted(extra)}")
        for required in ("v", "id", "kind"):
            if required not in doc:
                raise SchemaError(f"request missing field {required!r}")
        return cls(
            id=doc["id"],
            kind=doc["kind"],
            image=doc.get("image"),
            params=doc.get("params", {}),
            v=doc["v"],
        )


@dataclass(frozen=True)
class ErrorInfo:
    code: str
    message: str


@dataclass(frozen=True)
class PerceptionResponse:
    id: str
    status: str
    result: dict | None = None
    error: ErrorInfo | None = None
    backend_ms: float = 0.0
    v: int = PROTOCOL_VERSION

    def __post_init__(self) -> None:
        if self.status not in ("ok", "error"):
            raise SchemaError(f"bad status {self.status!r}")
        if self.status == "ok" and (self.result is None or self.error is not None):
            raise SchemaError("ok responses carry exactly a result")
        if self.status == "error" and (self.error is None or self.result is not None):
            raise SchemaError("error responses carry exactly an error")

    def to_json(self) -> str:
        doc: dict = {
            "v": self.v,
            "id": self.id,
            "status": self.status,
            "backend_ms": self.backend_ms,
        }
        if self.result is not None:
            doc["result"] = self.result
        if self.error is not None:
            doc["error"] = {"code": self.error.code, "message": self.error.message}
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "PerceptionResponse":
        doc = _load_object(text)
        extra = set(doc) - {"v", "id", "status", "result", "error", "backend_ms"}
        if extra:
            raise SchemaError(f"unknown response fields: {sorted(extra)}")
        error = None
        if "error" in doc:
            err = doc["error"]
            if not isinstance(err, dict) or set(err) != {"code", "message"}:
                raise SchemaError("error object must hold exactly code and message")
            error = ErrorInfo(code=err["code"], message=err["message"])
        return cls(
            id=doc.get("id", ""),
            status=doc.get("status", ""),
            result=doc.get("result"),
            error=error,
            backend_ms=doc.get("backend_ms", 0.0),
            v=doc.get("v", PROTOCOL_VERSION),
        )


def _load_object(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"payload is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("payload must be a JSON object")
    return doc


def ok_response(request_id: str, result: dict, backend_ms: float = 0.0) -> PerceptionResponse:
    return PerceptionResponse(id=request_id, status="ok", result=result, backend_ms=backend_ms)


def error_response(
    request_id: str, code: str, message: str, backend_ms: float = 0.0
) -> PerceptionResponse:
    return PerceptionResponse(
        id=request_id,
        status="error",
        error=ErrorInfo(code=code, message=message),
        backend_ms=backend_ms,
    )


_RESET_ERRORS = (ConnectionRefusedError, ConnectionResetError, BrokenPipeError, Eof)


class GatewayClient:
    """Blocking TCP client for the inference gateway.

    One in-flight request per connection; do not share an instance across
    threads mid-call.  Distinct clients may run concurrently.
    """

    def __init__(
        self,
        host: str = DEFAULT_HOST,
        port: int = DEFAULT_PORT,
        connect_timeout_ms: float = 1000.0,
    ) -> None:
        self.host = host
        self.port = port
        self.connect_timeout_ms = connect_timeout_ms
        self._sock: socket.socket | None = None

    def connect(self) -> None:
        self.close()
        try:
            self._sock = socket.create_connection(
                (self.host, self.port), timeout=self.connect_timeout_ms / 1000.0
            )
        except OSError as exc:
            self._sock = None
            raise ConnectionFailed(f"connect to {self.host}:{self.port} failed: {exc}") from exc

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def call(self, request: PerceptionRequest, timeout_ms: float = 2000.0) -> PerceptionResponse:
        """Send one request and wait for its response.

        Connection-level failures (refused, reset, server EOF) trigger
        exactly one reconnect-and-retry; a timeout is raised immediately.
        """
        frame = encode_frame(request.to_json())
        last_exc: Exception | None = None
        for attempt in (0, 1):
            try:
                if self._sock is None:
                    self.connect()
                payload = self._exchange(frame, timeout_ms)
                break
            except socket.timeout as exc:
                raise Timeout(f"no response within {timeout_ms}ms") from exc
            except ConnectionFailed as exc:
                self.close()
                last_exc = exc
            except _RESET_ERRORS as exc:
                self.close()
                last_exc = exc
            except OSError as exc:
                self.close()
                last_exc = exc
        else:
            raise ConnectionFailed(f"request failed after retry: {last_exc}") from last_exc

        try:
            response = PerceptionResponse.from_json(payload)
        except SchemaError as exc:
            raise ProtocolViolation(f"malformed response payload: {exc}") from exc
        if response.id != request.id:
            raise ProtocolViolation(
                f"response id {response.id!r} does not match request id {request.id!r}"
            )
        return response

    def _exchange(self, frame: bytes, timeout_ms: float) -> str:
        assert self._sock is not None
        self._sock.settimeout(timeout_ms / 1000.0)
        self._sock.sendall(frame)
        return decode_frame(self._sock.recv)

    def health(self, timeout_ms: float = 500.0) -> PerceptionResponse:
        return self.call(PerceptionRequest(id="health-check", kind="health"), timeout_ms)

    def __enter__(self) -> "GatewayClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
