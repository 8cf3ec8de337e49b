"""Keyword-table intent routing: one utterance in, one Intent out.

A phrase matches when its tokens appear as a contiguous subsequence of the
utterance tokens.  The winning kind has the highest count of matched
phrases; ties go to the kind owning the longest matched phrase, then to a
fixed priority order.  No match at all routes to Unknown.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class IntentKind(Enum):
    # Declaration order doubles as the default tie-break priority.
    ACTIVATE = "Activate"
    STATUS_CHECK = "StatusCheck"
    FACE_IDENTIFY = "FaceIdentify"
    FACE_ENROLL = "FaceEnroll"
    SCENE_DESCRIBE = "SceneDescribe"
    READ_TEXT = "ReadText"
    OBJECTS_IDENTIFY = "ObjectsIdentify"
    COUNT_MONEY = "CountMoney"
    NOTE_RECORD = "NoteRecord"
    NOTE_RETRIEVE = "NoteRetrieve"
    BARCODE_SCAN = "BarcodeScan"
    SHUTDOWN = "Shutdown"
    UNKNOWN = "Unknown"


class MissingSlot(Exception):
    """A slot-bearing intent matched but its slot text is empty."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Utterance:
    text: str
    confidence: float | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("utterance text is empty")


@dataclass(frozen=True)
class Intent:
    kind: IntentKind
    slots: dict = field(default_factory=dict)


DEFAULT_WAKE_WORD = "iris"

DEFAULT_TABLE: dict[IntentKind, tuple[str, ...]] = {
    IntentKind.SCENE_DESCRIBE: ("describe", "what do you see", "surroundings", "scene"),
    IntentKind.READ_TEXT: ("read",),
    IntentKind.OBJECTS_IDENTIFY: ("objects", "identify", "what is in front"),
    IntentKind.FACE_IDENTIFY: ("who is this", "who am i looking at"),
    IntentKind.FACE_ENROLL: ("remember", "this is"),
    IntentKind.COUNT_MONEY: ("money", "count my money", "how much money"),
    IntentKind.BARCODE_SCAN: ("barcode", "scan", "what product"),
    IntentKind.NOTE_RECORD: ("take a note", "remind me", "add to list"),
    IntentKind.NOTE_RETRIEVE: ("read my notes", "my reminders", "my list"),
    IntentKind.STATUS_CHECK: ("status", "battery"),
    IntentKind.SHUTDOWN: ("goodbye", "shut down"),
}

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace, drop empties."""
    return [tok for tok in text.lower().translate(_PUNCT_TABLE).split() if tok]


@dataclass(frozen=True)
class RouterConfig:
    wake_word: str
    table: dict[IntentKind, tuple[str, ...]]
    priority: tuple[IntentKind, ...]

    def __post_init__(self) -> None:
        seen: dict[str, IntentKind] = {}
        for kind, phrases in self.table.items():
            for phrase in phrases:
                if phrase != phrase.lower():
                    raise ConfigError(f"phrase {phrase!r} must be lowercase")
                if not normalize(phrase):
                    raise ConfigError(f"phrase {phrase!r} has no tokens")
                if phrase in seen:
                    raise ConfigError(
                        f"phrase {phrase!r} appears under both "
                        f"{seen[phrase].value} and {kind.value}"
                    )
                seen[phrase] = kind
        missing = [k.value for k in self.table if k not in self.priority]
        if missing:
            raise ConfigError(f"priority order missing kinds: {missing}")

    @classmethod
    def default(cls, wake_word: str = DEFAULT_WAKE_WORD) -> "RouterConfig":
        table = dict(DEFAULT_TABLE)
        table[IntentKind.ACTIVATE] = (wake_word.lower(),)
        return cls(wake_word=wake_word.lower(), table=table, priority=tuple(IntentKind))

    @classmethod
    def from_dict(cls, doc: dict) -> "RouterConfig":
        extra = set(doc) - {"wake_word", "table", "priority"}
        if extra:
            raise ConfigError(f"unknown router config keys: {sorted(extra)}")
        wake = doc.get("wake_word", DEFAULT_WAKE_WORD)
        by_value = {k.value: k for k in IntentKind}
        table: dict[IntentKind, tuple[str, ...]] = {}
        for name, phrases in doc.get("table", {}).items():
            if name not in by_value:
                raise ConfigError(f"unknown intent kind {name!r} in table")
            table[by_value[name]] = tuple(phrases)
        if not table:
            table = dict(DEFAULT_TABLE)
        table.setdefault(IntentKind.ACTIVATE, (wake.lower(),))
        priority = tuple(
            by_value[name]
            for name in doc.get("priority", [k.value for k in IntentKind])
        )
        return cls(wake_word=wake.lower(), table=table, priority=priority)

    @classmethod
    def from_file(cls, path: str | Path) -> "RouterConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def keyword_tokens(self) -> frozenset[str]:
        """Every token used by any phrase; the protected set for noise tests."""
        tokens: set[str] = set()
        for phrases in self.table.values():
            for phrase in phrases:
                tokens.update(normalize(phrase))
        return frozenset(tokens)


def _contains(tokens: list[str], phrase_tokens: list[str]) -> bool:
    span = len(phrase_tokens)
    return any(
        tokens[i : i + span] == phrase_tokens
        for i in range(len(tokens) - span + 1)
    )


def route(utterance: Utterance, config: RouterConfig) -> Intent:
    tokens = normalize(utterance.text)
    scores: list[tuple[int, int, int, IntentKind]] = []
    for kind, phrases in config.table.items():
        matched = [p for p in phrases if _contains(tokens, normalize(p))]
        if not matched:
            continue
        longest = max(len(normalize(p)) for p in matched)
        scores.append((-len(matched), -longest, config.priority.index(kind), kind))
    if not scores:
        return Intent(kind=IntentKind.UNKNOWN)
    winner = min(scores)[3]
    slots: dict = {}
    if winner in (IntentKind.FACE_ENROLL, IntentKind.NOTE_RECORD, IntentKind.NOTE_RETRIEVE):
        try:
            slots = extract_slots(winner, tokens)
        except MissingSlot:
            slots = {}
    return Intent(kind=winner, slots=slots)


_ENROLL_PHRASES = (["this", "is"], ["remember"])
_CATEGORY_MAP = (
    ({"remind", "reminder", "reminders"}, "reminder"),
    ({"list", "lists"}, "list"),
)


def extract_slots(kind: IntentKind, tokens: list[str]) -> dict:
    """Pull kind-specific slots out of normalized tokens.

    FaceEnroll takes the tokens after "this is"/"remember" as the person
    name; note kinds map category keywords, defaulting to "note".
    """
    if kind is IntentKind.FACE_ENROLL:
        for phrase in _ENROLL_PHRASES:
            span = len(phrase)
            for i in range(len(tokens) - span + 1):
                if tokens[i : i + span] == phrase:
                    remainder = tokens[i + span :]
                    if remainder:
                        return {"person_name": " ".join(remainder).title()}
                    raise MissingSlot("no name followed the enroll phrase")
        raise MissingSlot("no enroll phrase present")
    if kind in (IntentKind.NOTE_RECORD, IntentKind.NOTE_RETRIEVE):
        for keywords, category in _CATEGORY_MAP:
            if any(tok in keywords for tok in tokens):
                return {"category": category}
        return {"category": "note"}
    raise ValueError(f"{kind.value} carries no slots")
