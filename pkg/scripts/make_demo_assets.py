"""Regenerate everything under demo/: images, fixtures, catalog, config.

The images are deterministic patterns (the barcode one is a real rendered
symbol), so the fixture digests are stable across runs.  Scenario files are
hand-written and live in demo/scenarios/.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from airis.barcode import encode_scanline  # noqa: E402
from airis.gateway import pgm_digest  # noqa: E402
from airis.imaging import ImageFrame, save_pgm  # noqa: E402

DEMO_DIR = Path(__file__).resolve().parents[1] / "demo"
SCENE_CAPTION = "a man sitting at a table"


def pattern_frame(seed: int, width: int = 48, height: int = 36) -> ImageFrame:
    pixels = bytes(
        (x * (3 + seed) + y * (7 + seed) + seed * 31) % 256
        for y in range(height)
        for x in range(width)
    )
    return ImageFrame(width=width, height=height, pixels=pixels)


def barcode_frame(digits: str) -> ImageFrame:
    line = encode_scanline(digits, module_px=3)
    return ImageFrame(width=len(line), height=48, pixels=bytes(line) * 48)


def face_embedding() -> list[float]:
    rng = np.random.default_rng(7)
    return [round(float(v), 6) for v in rng.uniform(-1.0, 1.0, 128)]


def main() -> None:
    images = DEMO_DIR / "images"
    images.mkdir(parents=True, exist_ok=True)

    frames = {
        "scene": pattern_frame(1),
        "objects": pattern_frame(2),
        "text": pattern_frame(3),
        "money": pattern_frame(4),
        "face_maria": pattern_frame(5),
        "barcode": barcode_frame("4006381333931"),
    }
    digests = {}
    for name, frame in frames.items():
        data = save_pgm(frame)
        (images / f"{name}.pgm").write_bytes(data)
        digests[name] = pgm_digest(data)

    fixtures = [
        {
            "kind": "scene",
            "digest": digests["scene"],
            "result": {"caption": SCENE_CAPTION},
        },
        {
            "kind": "objects",
            "digest": digests["objects"],
            "result": {
                "detections": [
                    {"label": "person", "confidence": 0.92, "bbox": [0.40, 0.2, 0.55, 0.9]},
                    {"label": "person", "confidence": 0.88, "bbox": [0.50, 0.2, 0.66, 0.9]},
                    {"label": "cup", "confidence": 0.80, "bbox": [0.05, 0.6, 0.25, 0.8]},
                    {"label": "dog", "confidence": 0.30, "bbox": [0.70, 0.7, 0.90, 0.9]},
                ]
            },
        },
        {
            "kind": "ocr",
            "digest": digests["text"],
            "result": {
                "lines": [
                    {"text": "world", "confidence": 0.97, "bbox": [0.5, 0.1, 0.9, 0.2]},
                    {"text": "hello", "confidence": 0.98, "bbox": [0.1, 0.1, 0.4, 0.2]},
                    {"text": "from AIRIS", "confidence": 0.95, "bbox": [0.1, 0.3, 0.9, 0.4]},
                ]
            },
        },
        {
            "kind": "ocr",
            "digest": digests["money"],
            "result": {
                "lines": [
                    {"text": "20 EURO", "confidence": 0.9},
                    {"text": "5 EURO", "confidence": 0.9},
                ]
            },
        },
        {
            "kind": "face",
            "digest": digests["face_maria"],
            "result": {"embedding": face_embedding()},
        },
    ]
    (DEMO_DIR / "fixtures.json").write_text(json.dumps(fixtures, indent=2) + "\n")

    (DEMO_DIR / "catalog.csv").write_text(
        "gtin,name,price_minor,currency\n"
        "4006381333931,Stabilo Point 88 Pen,250,EUR\n"
        "0123456789012,Plain Oat Flakes,199,USD\n"
    )

    (DEMO_DIR / "config.json").write_text(
        json.dumps(
            {"wake_word": "iris", "fixtures": "fixtures.json", "catalog": "catalog.csv"},
            indent=2,
        )
        + "\n"
    )
    print(f"wrote demo assets under {DEMO_DIR}")


if __name__ == "__main__":
    main()
