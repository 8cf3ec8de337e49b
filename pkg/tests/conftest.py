"""Shared builders: deterministic frames, fixture sets, and wired sessions."""

import base64

import pytest

from airis.faces import EMBEDDING_DIM, FaceRegistry
from airis.gateway import (
    FixtureEmbeddingSource,
    FixtureEntry,
    InProcessClient,
    build_fixture_registry,
    pgm_digest,
)
from airis.imaging import ImageFrame, save_pgm
from airis.notes import NoteStore
from airis.orchestrator import Session


def pattern_frame(seed: int, width: int = 24, height: int = 18) -> ImageFrame:
    pixels = bytes(
        (x * (3 + seed) + y * (7 + seed) + seed * 31) % 256
        for y in range(height)
        for x in range(width)
    )
    return ImageFrame(width=width, height=height, pixels=pixels)


SCENE_FRAME = pattern_frame(1)
OBJECTS_FRAME = pattern_frame(2)
TEXT_FRAME = pattern_frame(3)
MONEY_FRAME = pattern_frame(4)
FACE_FRAME = pattern_frame(5)

FACE_EMBEDDING = [round(((i * 37) % 100) / 100.0 - 0.5, 6) for i in range(EMBEDDING_DIM)]

SCENE_CAPTION = "a man sitting at a table"

FIXTURE_ENTRIES = [
    FixtureEntry(
        kind="scene",
        digest=pgm_digest(save_pgm(SCENE_FRAME)),
        result={"caption": SCENE_CAPTION},
    ),
    FixtureEntry(
        kind="objects",
        digest=pgm_digest(save_pgm(OBJECTS_FRAME)),
        result={
            "detections": [
                {"label": "person", "confidence": 0.92, "bbox": [0.40, 0.2, 0.55, 0.9]},
                {"label": "person", "confidence": 0.88, "bbox": [0.50, 0.2, 0.66, 0.9]},
                {"label": "cup", "confidence": 0.80, "bbox": [0.05, 0.6, 0.25, 0.8]},
                {"label": "dog", "confidence": 0.30, "bbox": [0.7, 0.7, 0.9, 0.9]},
            ]
        },
    ),
    FixtureEntry(
        kind="ocr",
        digest=pgm_digest(save_pgm(TEXT_FRAME)),
        result={
            "lines": [
                {"text": "world", "confidence": 0.97, "bbox": [0.5, 0.1, 0.9, 0.2]},
                {"text": "hello", "confidence": 0.98, "bbox": [0.1, 0.1, 0.4, 0.2]},
                {"text": "from AIRIS", "confidence": 0.95, "bbox": [0.1, 0.3, 0.9, 0.4]},
            ]
        },
    ),
    FixtureEntry(
        kind="ocr",
        digest=pgm_digest(save_pgm(MONEY_FRAME)),
        result={
            "lines": [
                {"text": "20 EURO", "confidence": 0.9},
                {"text": "5 EURO", "confidence": 0.9},
            ]
        },
    ),
    FixtureEntry(
        kind="face",
        digest=pgm_digest(save_pgm(FACE_FRAME)),
        result={"embedding": FACE_EMBEDDING},
    ),
]


def make_session(tmp_path, latency_ms: float = 0.0, **overrides) -> Session:
    dispatcher = build_fixture_registry(FIXTURE_ENTRIES, force_latency_ms=latency_ms)
    defaults = dict(
        perception=InProcessClient(dispatcher),
        registry=FaceRegistry(tmp_path / "registry.jsonl"),
        notes=NoteStore(tmp_path / "notes"),
        embeddings=FixtureEmbeddingSource(FIXTURE_ENTRIES),
    )
    defaults.update(overrides)
    return Session(**defaults)


@pytest.fixture
def session(tmp_path) -> Session:
    return make_session(tmp_path)


def b64_pgm(frame: ImageFrame) -> str:
    return base64.b64encode(save_pgm(frame)).decode()
