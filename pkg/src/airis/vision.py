"""Turn backend perception results into spoken sentences.

Covers detection counting with coarse left/center/right positioning,
caption phrasing, and OCR reading order (top-to-bottom rows, left-to-right
within a row).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

DETECTION_MIN_CONFIDENCE = 0.5
OCR_MIN_CONFIDENCE = 0.4

BUCKETS = ("left", "center", "right")
_BUCKET_PHRASE = {
    "left": "on your left",
    "center": "in front of you",
    "right": "on your right",
}
IRREGULAR_PLURALS = {"person": "people", "knife": "knives", "mouse": "mice"}


class ResultFormatError(ValueError):
    """A backend result object does not match its kind's schema."""


def _check_bbox(bbox) -> tuple[float, float, float, float]:
    x0, y0, x1, y1 = (float(v) for v in bbox)
    if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
        raise ValueError(f"bbox {bbox} is not well-ordered in [0, 1]")
    return (x0, y0, x1, y1)


@dataclass(frozen=True)
class Detection:
    label: str
    confidence: float
    bbox: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        object.__setattr__(self, "bbox", _check_bbox(self.bbox))


@dataclass(frozen=True)
class DetectionSummary:
    counts: dict  # label -> count
    positions: dict  # label -> {bucket: count}

    def __post_init__(self) -> None:
        for label, count in self.counts.items():
            if sum(self.positions.get(label, {}).values()) != count:
                raise ValueError(f"positions for {label!r} do not sum to its count")


@dataclass(frozen=True)
class OcrLine:
    text: str
    confidence: float
    bbox: tuple[float, float, float, float] | None = None
    order_index: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.bbox is not None:
            object.__setattr__(self, "bbox", _check_bbox(self.bbox))


def position_bucket(bbox) -> str:
    center_x = (bbox[0] + bbox[2]) / 2.0
    if center_x < 1.0 / 3.0:
        return "left"
    if center_x > 2.0 / 3.0:
        return "right"
    return "center"


def summarize_detections(
    detections, min_conf: float = DETECTION_MIN_CONFIDENCE
) -> DetectionSummary:
    counts: Counter = Counter()
    positions: dict[str, Counter] = {}
    for det in detections:
        if det.confidence < min_conf:
            continue
        counts[det.label] += 1
        positions.setdefault(det.label, Counter())[position_bucket(det.bbox)] += 1
    return DetectionSummary(
        counts=dict(counts),
        positions={label: dict(c) for label, c in positions.items()},
    )


def pluralize(label: str, n: int) -> str:
    if n == 1:
        return label
    return IRREGULAR_PLURALS.get(label, label + "s")


def detections_to_sentence(summary: DetectionSummary) -> str:
    items = []
    for label in sorted(summary.counts):
        buckets = summary.positions[label]
        for bucket in BUCKETS:
            n = buckets.get(bucket, 0)
            if n:
                items.append(f"{n} {pluralize(label, n)} {_BUCKET_PHRASE[bucket]}")
    if not items:
        return "I don't see any objects I recognize."
    if len(items) > 1:
        listing = ", ".join(items[:-1]) + " and " + items[-1]
    else:
        listing = items[0]
    return f"I can see {listing}."


def _group_rows(lines):
    ordered = sorted(enumerate(lines), key=lambda item: (item[1].bbox[1], item[1].bbox[0]))
    rows: list[list[tuple[int, OcrLine]]] = []
    for index, line in ordered:
        placed = False
        for row in rows:
            anchor = row[0][1]
            overlap = min(anchor.bbox[3], line.bbox[3]) - max(anchor.bbox[1], line.bbox[1])
            min_height = min(
                anchor.bbox[3] - anchor.bbox[1], line.bbox[3] - line.bbox[1]
            )
            if overlap >= 0.5 * min_height:
                row.append((index, line))
                placed = True
                break
        if not placed:
            rows.append([(index, line)])
    for row in rows:
        row.sort(key=lambda item: (item[1].bbox[0], item[0]))
    return rows


def ocr_reading_order(lines, min_conf: float = OCR_MIN_CONFIDENCE) -> str:
    """Join surviving lines in reading order with single spaces.

    With bounding boxes, rows group on >= 50% vertical overlap and read
    top-to-bottom, left-to-right; otherwise order_index (falling back to
    input position) decides.
    """
    surviving = [line for line in lines if line.confidence >= min_conf]
    if not surviving:
        return ""
    if all(line.bbox is not None for line in surviving):
        rows = _group_rows(surviving)
        texts = [line.text for row in rows for _, line in row]
    else:
        indexed = sorted(
            enumerate(surviving),
            key=lambda item: item[1].order_index
            if item[1].order_index is not None
            else item[0],
        )
        texts = [line.text for _, line in indexed]
    return " ".join(texts)


def caption_to_sentence(caption: str) -> str:
    text = caption.strip()
    if not text:
        raise ValueError("caption is empty")
    text = text.rstrip(".")
    text = text[0].lower() + text[1:]
    return f"It looks like {text}."


def detections_from_result(result: dict) -> list[Detection]:
    try:
        return [
            Detection(
                label=d["label"], confidence=d["confidence"], bbox=tuple(d["bbox"])
            )
            for d in result["detections"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ResultFormatError(f"bad objects result: {exc}") from exc


def ocr_lines_from_result(result: dict) -> list[OcrLine]:
    try:
        return [
            OcrLine(
                text=line["text"],
                confidence=line["confidence"],
                bbox=tuple(line["bbox"]) if "bbox" in line else None,
                order_index=line.get("order_index"),
            )
            for line in result["lines"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ResultFormatError(f"bad ocr result: {exc}") from exc
