import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airis.router import (
    ConfigError,
    Intent,
    IntentKind,
    MissingSlot,
    RouterConfig,
    Utterance,
    extract_slots,
    normalize,
    route,
)

CONFIG = RouterConfig.default()


# Independent scoring oracle: brute-force phrase matching with explicit
# nested loops, kept deliberately separate from the router implementation.
def oracle_route_kind(text, config):
    tokens = normalize(text)
    best = None
    for kind in config.priority:
        phrases = config.table.get(kind, ())
        matched = []
        for phrase in phrases:
            ptoks = normalize(phrase)
            hit = False
            for i in range(len(tokens)):
                if tokens[i : i + len(ptoks)] == ptoks:
                    hit = True
            if hit:
                matched.append(ptoks)
        if not matched:
            continue
        key = (-len(matched), -max(len(p) for p in matched), config.priority.index(kind))
        if best is None or key < best[0]:
            best = (key, kind)
    return best[1] if best else IntentKind.UNKNOWN


class TestNormalize:
    def test_question(self):
        assert normalize("What do you see?") == ["what", "do", "you", "see"]

    def test_whitespace_and_punctuation(self):
        assert normalize("  READ   this. ") == ["read", "this"]

    @settings(max_examples=100)
    @given(st.text(max_size=60))
    def test_idempotent(self, text):
        once = normalize(text)
        assert normalize(" ".join(once)) == once


class TestRoute:
    def test_scene(self):
        assert route(Utterance("what do you see"), CONFIG).kind is IntentKind.SCENE_DESCRIBE

    def test_longest_phrase_beats_generic_verb(self):
        intent = route(Utterance("read my notes"), CONFIG)
        assert intent.kind is IntentKind.NOTE_RETRIEVE
        assert oracle_route_kind("read my notes", CONFIG) is IntentKind.NOTE_RETRIEVE

    def test_unknown(self):
        assert route(Utterance("please hello world"), CONFIG).kind is IntentKind.UNKNOWN

    def test_every_default_phrase_routes_to_its_kind(self):
        for kind, phrases in CONFIG.table.items():
            for phrase in phrases:
                assert route(Utterance(phrase), CONFIG).kind is kind, phrase

    def test_matches_oracle_on_mixed_corpus(self):
        rng = random.Random(11)
        all_phrases = [p for ps in CONFIG.table.values() for p in ps]
        fillers = ["please", "now", "can", "you", "the", "me", "hello", "today"]
        for _ in range(300):
            parts = []
            for _ in range(rng.randint(1, 3)):
                if rng.random() < 0.6:
                    parts.append(rng.choice(all_phrases))
                else:
                    parts.append(" ".join(rng.choices(fillers, k=rng.randint(1, 3))))
            text = " ".join(parts)
            if not text.strip():
                continue
            assert route(Utterance(text), CONFIG).kind is oracle_route_kind(text, CONFIG)

    def test_appending_unrelated_token_preserves_match(self):
        for kind, phrases in CONFIG.table.items():
            for phrase in phrases:
                grown = phrase + " zzz"
                assert route(Utterance(grown), CONFIG).kind is not IntentKind.UNKNOWN

    def test_route_is_pure(self):
        utt = Utterance("count my money")
        assert route(utt, CONFIG) == route(utt, CONFIG)


class TestSlots:
    def test_enroll_name(self):
        assert extract_slots(IntentKind.FACE_ENROLL, ["this", "is", "maria"]) == {
            "person_name": "Maria"
        }

    def test_note_category_reminder(self):
        tokens = normalize("remind me to buy milk")
        assert extract_slots(IntentKind.NOTE_RECORD, tokens) == {"category": "reminder"}

    def test_enroll_empty_remainder(self):
        with pytest.raises(MissingSlot):
            extract_slots(IntentKind.FACE_ENROLL, ["this", "is"])

    def test_category_default(self):
        assert extract_slots(IntentKind.NOTE_RECORD, ["take", "a", "note"]) == {
            "category": "note"
        }

    def test_category_list(self):
        assert extract_slots(IntentKind.NOTE_RECORD, ["add", "to", "list"]) == {
            "category": "list"
        }

    def test_route_fills_slots(self):
        intent = route(Utterance("remember bob marley"), CONFIG)
        assert intent == Intent(
            kind=IntentKind.FACE_ENROLL, slots={"person_name": "Bob Marley"}
        )

    def test_route_degrades_on_missing_slot(self):
        intent = route(Utterance("this is"), CONFIG)
        assert intent.kind is IntentKind.FACE_ENROLL
        assert intent.slots == {}


class TestConfig:
    def test_duplicate_phrase_rejected(self):
        table = dict(CONFIG.table)
        table[IntentKind.READ_TEXT] = ("read", "scan")  # "scan" owned by barcode
        with pytest.raises(ConfigError):
            RouterConfig(wake_word="iris", table=table, priority=tuple(IntentKind))

    def test_uppercase_phrase_rejected(self):
        with pytest.raises(ConfigError):
            RouterConfig(
                wake_word="iris",
                table={IntentKind.READ_TEXT: ("Read",)},
                priority=tuple(IntentKind),
            )

    def test_from_dict_round_trip(self):
        doc = {
            "wake_word": "echo",
            "table": {"ReadText": ["read"], "Activate": ["echo"]},
        }
        cfg = RouterConfig.from_dict(doc)
        assert cfg.wake_word == "echo"
        assert route(Utterance("echo"), cfg).kind is IntentKind.ACTIVATE

    def test_wake_word_routes_to_activate(self):
        assert route(Utterance("iris"), CONFIG).kind is IntentKind.ACTIVATE

    def test_keyword_tokens_cover_all_phrases(self):
        toks = CONFIG.keyword_tokens()
        assert {"read", "iris", "battery", "goodbye"} <= toks
