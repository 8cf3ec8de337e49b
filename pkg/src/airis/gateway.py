"""Inference gateway: accepts protocol requests and dispatches to backends.

Backends are content-addressed fixtures (SHA-256 of the canonical PGM bytes
keys a canned result) or an HTTP proxy to an upstream perception service.
The fixture file is a JSON array of {kind, digest, result, latency_ms?}
entries shared verbatim with the standalone reference backend; a "face"
entry carries a 128-d embedding and is only ever consumed locally by the
edge session, never served over the wire.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import socket
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from . import protocol
from .faces import EMBEDDING_DIM
from .imaging import PgmError, load_pgm
from .protocol import (
    PerceptionRequest,
    PerceptionResponse,
    decode_frame,
    encode_frame,
    error_response,
    ok_response,
)

WIRE_KINDS = ("scene", "objects", "ocr")
FIXTURE_KINDS = WIRE_KINDS + ("face",)
DEFAULT_KIND_LATENCY_MS = {"scene": 150.0, "objects": 150.0, "ocr": 150.0}


class GatewayError(Exception):
    pass


class BindFailure(GatewayError):
    pass


class FixtureError(ValueError):
    pass


class BackendError(Exception):
    """Carried back to the client inside an error response, never as a
    connection teardown."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_bbox_list(value) -> str | None:
    if (
        not isinstance(value, list)
        or len(value) != 4
        or not all(_is_number(v) for v in value)
    ):
        return "bbox must be a list of 4 numbers"
    x0, y0, x1, y1 = value
    if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
        return "bbox must be well-ordered within [0, 1]"
    return None


def validate_result(kind: str, result) -> list[str]:
    """Schema-check one fixture result object; returns error strings."""
    errors: list[str] = []
    if not isinstance(result, dict):
        return [f"result for kind {kind!r} must be an object"]
    if kind == "scene":
        if set(result) != {"caption"}:
            errors.append("scene result must hold exactly the key 'caption'")
        elif not isinstance(result["caption"], str) or not result["caption"].strip():
            errors.append("caption must be a non-empty string")
    elif kind == "objects":
        if set(result) != {"detections"} or not isinstance(result["detections"], list):
            return ["objects result must hold exactly a 'detections' list"]
        for i, det in enumerate(result["detections"]):
            if not isinstance(det, dict) or set(det) != {"label", "confidence", "bbox"}:
                errors.append(f"detections[{i}] must hold label, confidence, bbox")
                continue
            if not isinstance(det["label"], str) or not det["label"]:
                errors.append(f"detections[{i}].label must be a non-empty string")
            if not _is_number(det["confidence"]) or not 0 <= det["confidence"] <= 1:
                errors.append(f"detections[{i}].confidence must lie in [0, 1]")
            bbox_err = _check_bbox_list(det["bbox"])
            if bbox_err:
                errors.append(f"detections[{i}].{bbox_err}")
    elif kind == "ocr":
        if set(result) != {"lines"} or not isinstance(result["lines"], list):
            return ["ocr result must hold exactly a 'lines' list"]
        for i, line in enumerate(result["lines"]):
            if not isinstance(line, dict) or not {"text", "confidence"} <= set(line):
                errors.append(f"lines[{i}] must hold at least text and confidence")
                continue
            extra = set(line) - {"text", "confidence", "bbox", "order_index"}
            if extra:
                errors.append(f"lines[{i}] has unknown keys {sorted(extra)}")
            if not isinstance(line["text"], str):
                errors.append(f"lines[{i}].text must be a string")
            if not _is_number(line["confidence"]) or not 0 <= line["confidence"] <= 1:
                errors.append(f"lines[{i}].confidence must lie in [0, 1]")
            if "bbox" in line:
                bbox_err = _check_bbox_list(line["bbox"])
                if bbox_err:
                    errors.append(f"lines[{i}].{bbox_err}")
            if "order_index" in line and not isinstance(line["order_index"], int):
                errors.append(f"lines[{i}].order_index must be an integer")
    elif kind == "face":
        if set(result) != {"embedding"}:
            errors.append("face result must hold exactly the key 'embedding'")
        elif (
            not isinstance(result["embedding"], list)
            or len(result["embedding"]) != EMBEDDING_DIM
            or not all(_is_number(v) for v in result["embedding"])
        ):
            errors.append(f"embedding must be a list of {EMBEDDING_DIM} numbers")
    else:
        errors.append(f"unknown fixture kind {kind!r}")
    return errors


@dataclass(frozen=True)
class FixtureEntry:
    kind: str
    digest: str
    result: dict
    latency_ms: float | None = None


def validate_fixture_doc(doc) -> tuple[list[FixtureEntry], list[str]]:
    """Validate a parsed fixture document; collects per-entry error strings."""
    errors: list[str] = []
    entries: list[FixtureEntry] = []
    if not isinstance(doc, list):
        return [], ["fixture document must be a JSON array"]
    seen: dict[tuple[str, str], int] = {}
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            errors.append(f"entry {i}: must be an object")
            continue
        extra = set(entry) - {"kind", "digest", "result", "latency_ms"}
        if extra:
            errors.append(f"entry {i}: unknown keys {sorted(extra)}")
        missing = {"kind", "digest", "result"} - set(entry)
        if missing:
            errors.append(f"entry {i}: missing field {sorted(missing)}")
            continue
        kind, digest = entry["kind"], entry["digest"]
        if kind not in FIXTURE_KINDS:
            errors.append(f"entry {i}: unknown kind {kind!r}")
            continue
        if (
            not isinstance(digest, str)
            or len(digest) != 64
            or any(c not in "0123456789abcdef" for c in digest)
        ):
            errors.append(f"entry {i}: digest must be 64 lowercase hex characters")
            continue
        if (kind, digest) in seen:
            errors.append(
                f"entry {i}: duplicate (kind, digest) already used by entry "
                f"{seen[(kind, digest)]}"
            )
            continue
        if "latency_ms" in entry and (
            not _is_number(entry["latency_ms"]) or entry["latency_ms"] < 0
        ):
            errors.append(f"entry {i}: latency_ms must be a non-negative number")
            continue
        result_errors = validate_result(kind, entry["result"])
        if result_errors:
            errors.extend(f"entry {i}: {msg}" for msg in result_errors)
            continue
        seen[(kind, digest)] = i
        entries.append(
            FixtureEntry(
                kind=kind,
                digest=digest,
                result=entry["result"],
                latency_ms=entry.get("latency_ms"),
            )
        )
    return entries, errors


def load_fixtures(path: str | Path) -> list[FixtureEntry]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    entries, errors = validate_fixture_doc(doc)
    if errors:
        raise FixtureError("; ".join(errors))
    return entries


def pgm_digest(pgm_bytes: bytes) -> str:
    return hashlib.sha256(pgm_bytes).hexdigest()


class FixtureBackend:
    """Content-addressed canned results with simulated model latency."""

    def __init__(
        self,
        entries,
        kind_latency_ms: dict | None = None,
        force_latency_ms: float | None = None,
    ) -> None:
        self._by_key = {(e.kind, e.digest): e for e in entries}
        self._kind_latency = dict(DEFAULT_KIND_LATENCY_MS)
        if kind_latency_ms:
            self._kind_latency.update(kind_latency_ms)
        self._force_latency = force_latency_ms

    def latency_for(self, entry: FixtureEntry) -> float:
        if self._force_latency is not None:
            return self._force_latency
        if entry.latency_ms is not None:
            return entry.latency_ms
        return self._kind_latency.get(entry.kind, 0.0)

    def run(self, request: PerceptionRequest, image_bytes: bytes | None) -> dict:
        if image_bytes is None:
            raise BackendError("bad_request", "image required")
        entry = self._by_key.get((request.kind, pgm_digest(image_bytes)))
        if entry is None:
            raise BackendError("no_fixture", "no fixture for this image digest")
        latency = self.latency_for(entry)
        if latency > 0:
            time.sleep(latency / 1000.0)
        return json.loads(json.dumps(entry.result))


class HttpProxyBackend:
    """Forwards the unframed request JSON to POST {base}/v1/{kind}."""

    def __init__(self, base_url: str, timeout_ms: float = 5000.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout_ms = timeout_ms

    def run(self, request: PerceptionRequest, image_bytes: bytes | None) -> dict:
        url = f"{self.base_url}/v1/{request.kind}"
        req = urllib.request.Request(
            url,
            data=request.to_json().encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_ms / 1000.0) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise BackendError("no_fixture", "upstream has no fixture") from exc
            if exc.code == 400:
                raise BackendError("bad_request", "upstream rejected the request") from exc
            raise BackendError(
                "upstream_error", f"upstream returned HTTP {exc.code}"
            ) from exc
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise BackendError("upstream_unreachable", str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise BackendError("upstream_error", f"bad upstream JSON: {exc}") from exc


class Dispatcher:
    """Routes one request to its backend; errors ride inside the response."""

    def __init__(self, registry: dict) -> None:
        unknown = set(registry) - set(WIRE_KINDS)
        if unknown:
            raise GatewayError(f"cannot register backends for kinds {sorted(unknown)}")
        self.registry = dict(registry)

    def dispatch(self, request: PerceptionRequest) -> PerceptionResponse:
        if request.kind == "health":
            return ok_response(
                request.id,
                {"status": "ok", "kinds": sorted(self.registry)},
            )
        backend = self.registry.get(request.kind)
        if backend is None:
            return error_response(
                request.id, "unknown_kind", f"no backend for kind {request.kind!r}"
            )
        image_bytes: bytes | None = None
        if request.image is not None:
            try:
                image_bytes = base64.b64decode(request.image, validate=True)
                load_pgm(image_bytes)
            except (binascii.Error, ValueError, PgmError):
                return error_response(
                    request.id, "bad_request", "image is not valid base64 PGM"
                )
        elif request.kind in WIRE_KINDS:
            return error_response(request.id, "bad_request", "image required")
        started = time.perf_counter()
        try:
            result = backend.run(request, image_bytes)
        except BackendError as exc:
            elapsed = (time.perf_counter() - started) * 1000.0
            return error_response(request.id, exc.code, exc.message, backend_ms=elapsed)
        elapsed = (time.perf_counter() - started) * 1000.0
        return ok_response(request.id, result, backend_ms=elapsed)


class InProcessClient:
    """Same call surface as protocol.GatewayClient, but no sockets."""

    def __init__(self, dispatcher: Dispatcher) -> None:
        self.dispatcher = dispatcher

    def call(self, request: PerceptionRequest, timeout_ms: float = 2000.0) -> PerceptionResponse:
        return self.dispatcher.dispatch(request)

    def health(self, timeout_ms: float = 500.0) -> PerceptionResponse:
        return self.call(PerceptionRequest(id="health-check", kind="health"), timeout_ms)

    def close(self) -> None:
        pass


class GatewayServer:
    """Threaded TCP server speaking the length-prefixed protocol."""

    def __init__(
        self,
        dispatcher: Dispatcher,
        host: str = protocol.DEFAULT_HOST,
        port: int = protocol.DEFAULT_PORT,
    ) -> None:
        self.dispatcher = dispatcher
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._sock.bind((host, port))
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._sock.listen(16)
        self._closing = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def start(self) -> "GatewayServer":
        self._thread.start()
        return self

    def _accept_loop(self) -> None:
        while not self._closing.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True
            ).start()

    def _serve_connection(self, conn: socket.socket) -> None:
        with conn:
            while True:
                try:
                    payload = decode_frame(conn.recv)
                except protocol.Eof:
                    return
                except (protocol.Oversize, protocol.BadUtf8, OSError):
                    self._send_error(conn, "", "bad_frame", "unreadable frame")
                    self._linger_close(conn)
                    return
                try:
                    request = PerceptionRequest.from_json(payload)
                except protocol.SchemaError as exc:
                    try:
                        doc = json.loads(payload)
                        request_id = doc.get("id", "") if isinstance(doc, dict) else ""
                    except (json.JSONDecodeError, ValueError):
                        self._send_error(conn, "", "bad_frame", "payload is not JSON")
                        self._linger_close(conn)
                        return
                    self._send_error(conn, str(request_id), "bad_request", str(exc))
                    continue
                response = self.dispatcher.dispatch(request)
                try:
                    conn.sendall(encode_frame(response.to_json()))
                except OSError:
                    return

    @staticmethod
    def _linger_close(conn: socket.socket) -> None:
        # Drain unread input before closing so the error response is not
        # clobbered by a TCP reset.
        try:
            conn.shutdown(socket.SHUT_WR)
            conn.settimeout(0.2)
            while conn.recv(4096):
                pass
        except OSError:
            pass

    def _send_error(self, conn, request_id: str, code: str, message: str) -> None:
        try:
            conn.sendall(
                encode_frame(error_response(request_id, code, message).to_json())
            )
        except OSError:
            pass

    def close(self) -> None:
        self._closing.set()
        try:
            self._sock.close()
        except OSError:
            pass


def serve(bind_address: tuple[str, int], registry: dict) -> GatewayServer:
    """Bind, start accepting, and return the running server handle."""
    dispatcher = registry if isinstance(registry, Dispatcher) else Dispatcher(registry)
    server = GatewayServer(dispatcher, host=bind_address[0], port=bind_address[1])
    return server.start()


def build_fixture_registry(
    entries,
    kind_latency_ms: dict | None = None,
    force_latency_ms: float | None = None,
) -> Dispatcher:
    backend = FixtureBackend(
        entries, kind_latency_ms=kind_latency_ms, force_latency_ms=force_latency_ms
    )
    kinds = {e.kind for e in entries if e.kind in WIRE_KINDS}
    return Dispatcher({kind: backend for kind in sorted(kinds)})


def build_proxy_registry(base_url: str, timeout_ms: float = 5000.0) -> Dispatcher:
    backend = HttpProxyBackend(base_url, timeout_ms=timeout_ms)
    return Dispatcher({kind: backend for kind in WIRE_KINDS})


class FixtureEmbeddingSource:
    """Digest-keyed face embeddings from 'face' fixture entries (edge-local)."""

    def __init__(self, entries) -> None:
        self._by_digest = {
            e.digest: [float(v) for v in e.result["embedding"]]
            for e in entries
            if e.kind == "face"
        }

    def embedding_for(self, pgm_bytes: bytes):
        return self._by_digest.get(pgm_digest(pgm_bytes))
