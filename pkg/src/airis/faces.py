"""Face enrollment and nearest-neighbor identification over 128-d embeddings.

Only embeddings are ever stored, never pixels: the persisted JSON-lines
schema is fixed to {person_id, display_name, created_at, embeddings} and
any other key fails the load.  Identification is a brute-force Euclidean
scan with a distance threshold; ties resolve to the lexicographically
smallest person id.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

EMBEDDING_DIM = 128
DEFAULT_THRESHOLD = 0.6

_RECORD_KEYS = {"person_id", "display_name", "created_at", "embeddings"}


class RegistryError(Exception):
    pass


class StorageFailure(RegistryError):
    pass


class CorruptLine(RegistryError):
    """A persisted line violates the registry schema; load fails closed."""


class InvalidEmbedding(ValueError):
    pass


def check_embedding(values) -> tuple[float, ...]:
    emb = tuple(float(v) for v in values)
    if len(emb) != EMBEDDING_DIM:
        raise InvalidEmbedding(f"expected {EMBEDDING_DIM} components, got {len(emb)}")
    if not all(np.isfinite(emb)):
        raise InvalidEmbedding("embedding contains non-finite values")
    return emb


@dataclass(frozen=True)
class FaceRecord:
    person_id: str
    display_name: str
    created_at: str  # RFC 3339 UTC
    embeddings: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class MatchResult:
    """Either a known person (person_id set) or unknown (nearest only)."""

    person_id: str | None
    display_name: str | None
    distance: float | None
    nearest_distance: float | None

    @property
    def known(self) -> bool:
        return self.person_id is not None


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat()


class FaceRegistry:
    """In-memory registry with optional JSON-lines persistence.

    Writes are serialized and hit disk via temp-file-then-rename, so a
    crash never leaves a half-written registry behind.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: list[FaceRecord] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._records = _read_records(self.path)

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[FaceRecord]:
        return list(self._records)

    def enroll(self, name: str, embedding) -> str:
        """Add an embedding under `name`, merging case-insensitive duplicates."""
        emb = check_embedding(embedding)
        name = name.strip()
        if not name:
            raise ValueError("display name is empty")
        with self._lock:
            for i, record in enumerate(self._records):
                if record.display_name.lower() == name.lower():
                    self._records[i] = FaceRecord(
                        person_id=record.person_id,
                        display_name=record.display_name,
                        created_at=record.created_at,
                        embeddings=record.embeddings + (emb,),
                    )
                    self._persist_locked()
                    return record.person_id
            record = FaceRecord(
                person_id=uuid.uuid4().hex[:12],
                display_name=name,
                created_at=_now_rfc3339(),
                embeddings=(emb,),
            )
            self._records.append(record)
            self._persist_locked()
            return record.person_id

    def identify(self, embedding, threshold: float = DEFAULT_THRESHOLD) -> MatchResult:
        """Nearest neighbor over every stored embedding, gated by threshold."""
        emb = np.asarray(check_embedding(embedding), dtype=np.float64)
        best_id: str | None = None
        best_name: str | None = None
        best_dist: float | None = None
        for record in sorted(self._records, key=lambda r: r.person_id):
            matrix = np.asarray(record.embeddings, dtype=np.float64)
            dist = float(np.sqrt(((matrix - emb) ** 2).sum(axis=1)).min())
            if best_dist is None or dist < best_dist:
                best_dist = dist
                best_id = record.person_id
                best_name = record.display_name
        if best_dist is None:
            return MatchResult(None, None, None, None)
        if best_dist <= threshold:
            return MatchResult(best_id, best_name, best_dist, best_dist)
        return MatchResult(None, None, None, best_dist)

    def remove(self, name: str) -> int:
        with self._lock:
            before = len(self._records)
            self._records = [
                r for r in self._records if r.display_name.lower() != name.strip().lower()
            ]
            removed = before - len(self._records)
            if removed:
                self._persist_locked()
            return removed

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise StorageFailure("no registry path configured")
        _write_records(target, self._records)

    @classmethod
    def load(cls, path: str | Path) -> "FaceRegistry":
        registry = cls.__new__(cls)
        registry.path = Path(path)
        registry._lock = threading.Lock()
        registry._records = _read_records(registry.path)
        return registry

    def _persist_locked(self) -> None:
        if self.path is not None:
            _write_records(self.path, self._records)


def _write_records(path: Path, records: list[FaceRecord]) -> None:
    lines = []
    for record in records:
        lines.append(
            json.dumps(
                {
                    "person_id": record.person_id,
                    "display_name": record.display_name,
                    "created_at": record.created_at,
                    "embeddings": [list(e) for e in record.embeddings],
                },
                separators=(",", ":"),
            )
        )
    data = "".join(line + "\n" for line in lines)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".registry-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise StorageFailure(f"cannot persist registry to {path}: {exc}") from exc


def _read_records(path: Path) -> list[FaceRecord]:
    records: list[FaceRecord] = []
    seen_ids: set[str] = set()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageFailure(f"cannot read registry {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLine(f"line {lineno}: not JSON ({exc})") from exc
        if not isinstance(doc, dict) or set(doc) != _RECORD_KEYS:
            raise CorruptLine(
                f"line {lineno}: keys must be exactly {sorted(_RECORD_KEYS)}"
            )
        if doc["person_id"] in seen_ids:
            raise CorruptLine(f"line {lineno}: duplicate person_id {doc['person_id']!r}")
        seen_ids.add(doc["person_id"])
        try:
            embeddings = tuple(check_embedding(e) for e in doc["embeddings"])
        except (InvalidEmbedding, TypeError) as exc:
            raise CorruptLine(f"line {lineno}: {exc}") from exc
        if not embeddings:
            raise CorruptLine(f"line {lineno}: record has no embeddings")
        records.append(
            FaceRecord(
                person_id=doc["person_id"],
                display_name=doc["display_name"],
                created_at=doc["created_at"],
                embeddings=embeddings,
            )
        )
    return records
