"""Append-only note files, one per category.

Line format is "RFC3339\\tid\\ttext"; any whitespace inside the note text
collapses to single spaces so the three-field law always holds.
"""

from __future__ import annotations

import fcntl
import re
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

DEFAULT_CATEGORIES = ("reminder", "note", "list")


class NoteError(Exception):
    pass


class UnknownCategory(NoteError):
    pass


class EmptyText(NoteError):
    pass


class StorageFailure(NoteError):
    pass


@dataclass(frozen=True)
class Note:
    id: str
    category: str
    text: str
    created_at: str  # RFC 3339 UTC


_WS = re.compile(r"\s+")


def sanitize_text(text: str) -> str:
    return _WS.sub(" ", text).strip()


class NoteStore:
    def __init__(self, directory: str | Path, categories=DEFAULT_CATEGORIES) -> None:
        self.directory = Path(directory)
        self.categories = tuple(categories)
        self._lock = threading.Lock()

    def _path(self, category: str) -> Path:
        if category not in self.categories:
            raise UnknownCategory(f"category {category!r} is not configured")
        return self.directory / f"{category}.txt"

    def record(self, category: str, text: str) -> Note:
        path = self._path(category)
        clean = sanitize_text(text)
        if not clean:
            raise EmptyText("note text is empty after sanitization")
        note = Note(
            id=uuid.uuid4().hex[:12],
            category=category,
            text=clean,
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        line = f"{note.created_at}\t{note.id}\t{note.text}\n"
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            with self._lock, open(path, "a", encoding="utf-8") as fh:
                fcntl.flock(fh, fcntl.LOCK_EX)
                fh.write(line)
                fh.flush()
        except OSError as exc:
            raise StorageFailure(f"cannot append to {path}: {exc}") from exc
        return note

    def list(self, category: str) -> list[Note]:
        """Notes in chronological order; ties keep file order."""
        path = self._path(category)
        if not path.exists():
            return []
        notes = []
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise StorageFailure(f"cannot read {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise StorageFailure(f"{path} line {lineno}: expected 3 fields")
            created_at, note_id, text = fields
            notes.append(Note(id=note_id, category=category, text=text, created_at=created_at))
        notes.sort(key=lambda n: datetime.fromisoformat(n.created_at))
        return notes

    def clear(self, category: str) -> int:
        path = self._path(category)
        removed = len(self.list(category))
        if path.exists():
            try:
                with self._lock, open(path, "w", encoding="utf-8"):
                    pass
            except OSError as exc:
                raise StorageFailure(f"cannot truncate {path}: {exc}") from exc
        return removed
