import json
import math
import random

import pytest

from airis.faces import (
    DEFAULT_THRESHOLD,
    EMBEDDING_DIM,
    CorruptLine,
    FaceRegistry,
    InvalidEmbedding,
    MatchResult,
)


def rand_embedding(rng, lo=-1.0, hi=1.0):
    return [rng.uniform(lo, hi) for _ in range(EMBEDDING_DIM)]


# Independent oracle: plain-Python brute-force scan over every stored
# embedding, with the same threshold/tie rules but none of the registry code.
def oracle_identify(records, query, threshold):
    best = None  # (distance, person_id, name)
    for person_id, name, embeddings in sorted(records):
        for emb in embeddings:
            dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(emb, query)))
            if best is None or dist < best[0]:
                best = (dist, person_id, name)
    if best is None:
        return MatchResult(None, None, None, None)
    dist, person_id, name = best
    if dist <= threshold:
        return MatchResult(person_id, name, dist, dist)
    return MatchResult(None, None, None, dist)


class TestEnroll:
    def test_first_enroll(self, tmp_path):
        reg = FaceRegistry(tmp_path / "reg.jsonl")
        rng = random.Random(1)
        reg.enroll("Maria", rand_embedding(rng))
        assert len(reg) == 1
        assert len(reg.records()[0].embeddings) == 1

    def test_same_name_merges_case_insensitive(self, tmp_path):
        reg = FaceRegistry(tmp_path / "reg.jsonl")
        rng = random.Random(2)
        pid1 = reg.enroll("Maria", rand_embedding(rng))
        pid2 = reg.enroll("maria", rand_embedding(rng))
        assert pid1 == pid2
        assert len(reg) == 1
        assert len(reg.records()[0].embeddings) == 2

    def test_file_line_count_tracks_record_count(self, tmp_path):
        path = tmp_path / "reg.jsonl"
        reg = FaceRegistry(path)
        rng = random.Random(3)
        names = [f"person {i}" for i in range(12)]
        expected = set()
        for _ in range(40):
            name = rng.choice(names)
            expected.add(name)
            reg.enroll(name, rand_embedding(rng))
            lines = [l for l in path.read_text().splitlines() if l.strip()]
            assert len(lines) == len(expected) == len(reg)

    def test_bad_embedding_rejected(self, tmp_path):
        reg = FaceRegistry()
        with pytest.raises(InvalidEmbedding):
            reg.enroll("X", [0.0] * 127)
        with pytest.raises(InvalidEmbedding):
            reg.enroll("X", [float("nan")] * EMBEDDING_DIM)


class TestIdentify:
    def test_empty_registry(self):
        result = FaceRegistry().identify([0.0] * EMBEDDING_DIM)
        assert result == MatchResult(None, None, None, None)
        assert not result.known

    def test_exact_match_distance_zero(self):
        reg = FaceRegistry()
        rng = random.Random(4)
        emb = rand_embedding(rng)
        pid = reg.enroll("Anna", emb)
        result = reg.identify(emb)
        assert result.known and result.person_id == pid
        assert result.distance == 0.0

    def test_matches_brute_force_oracle(self):
        rng = random.Random(5)
        reg = FaceRegistry()
        records = []
        for i in range(50):
            embs = [rand_embedding(rng) for _ in range(rng.randint(1, 3))]
            pid = None
            for e in embs:
                pid = reg.enroll(f"person {i}", e)
            records.append((pid, f"person {i}", embs))
        for _ in range(20):
            if rng.random() < 0.5:
                query = rand_embedding(rng)
            else:
                base = rng.choice(records)[2][0]
                query = [v + rng.uniform(-0.03, 0.03) for v in base]
            got = reg.identify(query)
            want = oracle_identify(records, query, DEFAULT_THRESHOLD)
            assert got.person_id == want.person_id
            assert got.display_name == want.display_name
            if want.nearest_distance is None:
                assert got.nearest_distance is None
            else:
                assert got.nearest_distance == pytest.approx(
                    want.nearest_distance, abs=1e-9
                )

    def test_threshold_monotonicity(self):
        rng = random.Random(6)
        reg = FaceRegistry()
        emb = rand_embedding(rng)
        reg.enroll("Zed", emb)
        query = [v + 0.04 for v in emb]
        for low, high in [(0.1, 0.5), (0.3, 0.9), (0.459, 3.0)]:
            if reg.identify(query, threshold=low).known:
                assert reg.identify(query, threshold=high).known


class TestRemove:
    def test_remove_absent(self):
        assert FaceRegistry().remove("nobody") == 0

    def test_enroll_then_remove(self, tmp_path):
        reg = FaceRegistry(tmp_path / "reg.jsonl")
        reg.enroll("Maria", [0.5] * EMBEDDING_DIM)
        assert reg.remove("MARIA") == 1
        assert len(reg) == 0
        assert reg.remove("maria") == 0  # idempotent


class TestPersistence:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "reg.jsonl"
        reg = FaceRegistry(path)
        rng = random.Random(7)
        for name in ("A", "B", "C"):
            reg.enroll(name, rand_embedding(rng))
        loaded = FaceRegistry.load(path)
        assert loaded.records() == reg.records()

    def test_raw_image_key_rejected(self, tmp_path):
        path = tmp_path / "reg.jsonl"
        doc = {
            "person_id": "x",
            "display_name": "X",
            "created_at": "2026-01-01T00:00:00+00:00",
            "embeddings": [[0.0] * EMBEDDING_DIM],
            "image": "ABCD",
        }
        path.write_text(json.dumps(doc) + "\n")
        with pytest.raises(CorruptLine) as err:
            FaceRegistry.load(path)
        assert "line 1" in str(err.value)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "reg.jsonl"
        path.write_text("")
        assert len(FaceRegistry.load(path)) == 0

    def test_no_undocumented_keys_persisted(self, tmp_path):
        path = tmp_path / "reg.jsonl"
        reg = FaceRegistry(path)
        rng = random.Random(8)
        for i in range(5):
            reg.enroll(f"p{i}", rand_embedding(rng))
        for line in path.read_text().splitlines():
            assert set(json.loads(line)) == {
                "person_id",
                "display_name",
                "created_at",
                "embeddings",
            }
