"""EAN-13 scanline encoding/decoding and product catalog lookup.

Decoding works from first principles: binarize the line with Otsu, run-length
encode, locate the start guard (three roughly equal runs preceded by a quiet
zone), estimate the module width from the guard, then classify each 7-module
digit window against the standard L/G/R patterns by per-run width error.  The
first digit comes from the left-half parity sequence, and nothing is ever
returned without passing the mod-10 checksum.  A failed forward pass is
retried on the reversed line, so mirrored scans decode too.
"""

from __future__ import annotations

import csv
import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import ImageFrame, contrast_stretch, otsu_threshold_value, sharpen

# Standard EAN-13 digit patterns (1 = bar module, 0 = space module).
_L_CODES = (
    "0001101", "0011001", "0010011", "0111101", "0100011",
    "0110001", "0101111", "0111011", "0110111", "0001011",
)
_G_CODES = (
    "0100111", "0110011", "0011011", "0100001", "0011101",
    "0111001", "0000101", "0010001", "0001001", "0010111",
)
_R_CODES = (
    "1110010", "1100110", "1101100", "1000010", "1011100",
    "1001110", "1010000", "1000100", "1001000", "1110100",
)

# Left-half parity sequence (O = L pattern, E = G pattern) -> first digit.
PARITY_SEQUENCES = {
    "OOOOOO": 0, "OOEOEE": 1, "OOEEOE": 2, "OOEEEO": 3, "OEOOEE": 4,
    "OEEOOE": 5, "OEEEOO": 6, "OEOEOE": 7, "OEOEEO": 8, "OEEOEO": 9,
}
_FIRST_TO_PARITY = {v: k for k, v in PARITY_SEQUENCES.items()}

GUARD_TOLERANCE = 0.4  # relative run-width tolerance against the module estimate
ROW_FRACTIONS = (0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8, 0.1, 0.9)  # center-out sweep


class BarcodeError(Exception):
    pass


class BadInput(BarcodeError):
    pass


class NoGuard(BarcodeError):
    """No plausible guard structure found (or a guard failed verification)."""


class PatternMismatch(BarcodeError):
    def __init__(self, digit_index: int, message: str) -> None:
        super().__init__(f"digit {digit_index}: {message}")
        self.digit_index = digit_index


class BadChecksum(BarcodeError):
    pass


class NotFound(BarcodeError):
    """No row of the image yielded a checksum-valid symbol."""


class CatalogError(ValueError):
    pass


def checksum_digit(digits: str) -> int:
    """Check digit for a 12-digit prefix: odd positions weigh 1, even weigh 3."""
    if len(digits) != 12 or not digits.isdigit():
        raise BadInput("expected exactly 12 decimal digits")
    odd = sum(int(d) for d in digits[0::2])
    even = sum(int(d) for d in digits[1::2])
    return (10 - (odd + 3 * even) % 10) % 10


def is_checksum_valid(digits: str) -> bool:
    return (
        len(digits) == 13
        and digits.isdigit()
        and checksum_digit(digits[:12]) == int(digits[12])
    )


def _pattern_runs(pattern: str) -> tuple[int, ...]:
    runs = []
    current, count = pattern[0], 0
    for ch in pattern:
        if ch == current:
            count += 1
        else:
            runs.append(count)
            current, count = ch, 1
    runs.append(count)
    return tuple(runs)


_LEFT_CANDIDATES = tuple(
    [(d, "O", _pattern_runs(_L_CODES[d])) for d in range(10)]
    + [(d, "E", _pattern_runs(_G_CODES[d])) for d in range(10)]
)
_RIGHT_CANDIDATES = tuple((d, _pattern_runs(_R_CODES[d])) for d in range(10))


def modules_for(digits: str) -> str:
    """The 95-character module string (1 = bar) for a checksum-valid code."""
    if not is_checksum_valid(digits):
        raise BadChecksum(f"{digits!r} is not a checksum-valid EAN-13 code")
    parity = _FIRST_TO_PARITY[int(digits[0])]
    parts = ["101"]
    for ch, flag in zip(digits[1:7], parity):
        codes = _L_CODES if flag == "O" else _G_CODES
        parts.append(codes[int(ch)])
    parts.append("01010")
    for ch in digits[7:13]:
        parts.append(_R_CODES[int(ch)])
    parts.append("101")
    return "".join(parts)


def encode_scanline(digits: str, module_px: int = 1, quiet_px: int | None = None) -> bytes:
    """Render a symbol as luminance: bars are 0, spaces and quiet zones 255."""
    if module_px < 1:
        raise BadInput("module_px must be >= 1")
    if quiet_px is None:
        quiet_px = 7 * module_px
    if quiet_px < 7 * module_px:
        raise BadInput("quiet zone must be at least 7 modules wide")
    modules = modules_for(digits)
    body = bytearray()
    for bit in modules:
        body.extend((0 if bit == "1" else 255,) * module_px)
    quiet = bytes([255]) * quiet_px
    return quiet + bytes(body) + quiet


def _binarize_runs(line) -> list[tuple[bool, int]]:
    """Otsu-binarize a scanline and run-length encode it as (is_bar, width)."""
    values = np.asarray(bytearray(line) if isinstance(line, (bytes, bytearray)) else line)
    values = values.astype(np.int64)
    if values.size == 0:
        raise BadInput("empty scanline")
    hist = np.bincount(values, minlength=256)
    threshold = otsu_threshold_value(hist.tolist())
    if threshold is None:
        raise NoGuard("scanline has a single gray level")
    bars = values < threshold
    boundaries = np.flatnonzero(np.diff(bars)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    return [(bool(bars[s]), int(e - s)) for s, e in zip(starts, ends)]


def _classify(widths, module: float, candidates):
    best = None
    for entry in candidates:
        pattern = entry[-1]
        err = sum(abs(w - p * module) for w, p in zip(widths, pattern))
        if best is None or err < best[0]:
            best = (err, entry)
    return best[1]


def _parse_from_guard(runs, start: int) -> str:
    widths = [w for _, w in runs]
    module = (widths[start] + widths[start + 1] + widths[start + 2]) / 3.0

    def guard_ok(index: int, count: int) -> bool:
        return all(
            abs(widths[index + k] - module) <= GUARD_TOLERANCE * module
            for k in range(count)
        )

    left_digits = []
    parity = []
    for j in range(6):
        window = widths[start + 3 + 4 * j : start + 7 + 4 * j]
        digit, flag, _ = _classify(window, module, _LEFT_CANDIDATES)
        left_digits.append(digit)
        parity.append(flag)
    first = PARITY_SEQUENCES.get("".join(parity))
    if first is None:
        raise PatternMismatch(0, f"parity sequence {''.join(parity)} is not valid")
    if not guard_ok(start + 27, 5):
        raise NoGuard("center guard failed width check")
    right_digits = []
    for j in range(6):
        window = widths[start + 32 + 4 * j : start + 36 + 4 * j]
        digit, _ = _classify(window, module, _RIGHT_CANDIDATES)
        right_digits.append(digit)
    if not guard_ok(start + 56, 3):
        raise NoGuard("end guard failed width check")
    digits = str(first) + "".join(map(str, left_digits + right_digits))
    if not is_checksum_valid(digits):
        raise BadChecksum(f"decoded {digits} fails the checksum")
    return digits


_ERROR_RANK = {NoGuard: 0, PatternMismatch: 1, BadChecksum: 2}


def _decode_runs(runs) -> str:
    best_error: BarcodeError = NoGuard("no start guard located")
    for start in range(1, len(runs) - 58):
        is_bar, width = runs[start]
        if not is_bar:
            continue
        g = [runs[start][1], runs[start + 1][1], runs[start + 2][1]]
        median = sorted(g)[1]
        if any(abs(w - median) > GUARD_TOLERANCE * median for w in g):
            continue
        module = sum(g) / 3.0
        quiet_is_bar, quiet_width = runs[start - 1]
        if quiet_is_bar or quiet_width < 3 * module:
            continue
        try:
            return _parse_from_guard(runs, start)
        except BarcodeError as exc:
            if _ERROR_RANK[type(exc)] >= _ERROR_RANK[type(best_error)]:
                best_error = exc
    raise best_error


def decode_scanline(line) -> str:
    """Decode one luminance scanline; retries on the reversed line."""
    runs = _binarize_runs(line)
    try:
        return _decode_runs(runs)
    except BarcodeError as forward_error:
        try:
            return _decode_runs(runs[::-1])
        except BarcodeError as reverse_error:
            if _ERROR_RANK[type(reverse_error)] > _ERROR_RANK[type(forward_error)]:
                raise reverse_error from None
            raise forward_error from None


def decode_image(frame: ImageFrame) -> str:
    """Preprocess (contrast stretch 1..99, sharpen) and sweep rows center-out."""
    enhanced = sharpen(contrast_stretch(frame, 1, 99))
    tried: set[int] = set()
    for fraction in ROW_FRACTIONS:
        y = min(enhanced.height - 1, int(fraction * enhanced.height))
        if y in tried:
            continue
        tried.add(y)
        try:
            return decode_scanline(enhanced.row(y))
        except BarcodeError:
            continue
    raise NotFound("no row decoded to a checksum-valid symbol")


@dataclass(frozen=True)
class ProductRecord:
    gtin: str
    name: str
    price_minor: int | None = None
    currency: str | None = None

    def __post_init__(self) -> None:
        if not is_checksum_valid(self.gtin):
            raise CatalogError(f"gtin {self.gtin!r} fails the checksum")


class Catalog:
    """Read-only GTIN -> product map loaded from CSV."""

    COLUMNS = ("gtin", "name", "price_minor", "currency")

    def __init__(self, records: dict[str, ProductRecord] | None = None) -> None:
        self._records = dict(records or {})

    def __len__(self) -> int:
        return len(self._records)

    def get(self, gtin: str) -> ProductRecord | None:
        return self._records.get(gtin)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Catalog":
        records: dict[str, ProductRecord] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != cls.COLUMNS:
                raise CatalogError(
                    f"catalog header must be {','.join(cls.COLUMNS)}"
                )
            for row_number, row in enumerate(reader, start=2):
                gtin = row["gtin"].strip()
                if gtin in records:
                    raise CatalogError(f"row {row_number}: duplicate gtin {gtin}")
                price = row["price_minor"].strip()
                currency = row["currency"].strip()
                records[gtin] = ProductRecord(
                    gtin=gtin,
                    name=row["name"].strip(),
                    price_minor=int(price) if price else None,
                    currency=currency or None,
                )
        return cls(records)


@dataclass(frozen=True)
class LookupOutcome:
    record: ProductRecord | None
    network_warning: bool = False


def lookup(
    digits: str,
    catalog: Catalog,
    remote_base_url: str | None = None,
    timeout_ms: float = 2000.0,
) -> LookupOutcome:
    """Catalog hit, else optional remote GET {base}/product/{gtin}; a miss is
    a value, and network trouble is reported as a warning flag, not an error."""
    record = catalog.get(digits)
    if record is not None:
        return LookupOutcome(record=record)
    if remote_base_url is None:
        return LookupOutcome(record=None)
    url = f"{remote_base_url.rstrip('/')}/product/{digits}"
    if not re.match(r"^https?://", url):
        return LookupOutcome(record=None, network_warning=True)
    try:
        with urllib.request.urlopen(url, timeout=timeout_ms / 1000.0) as response:
            doc = json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        if exc.code == 404:
            return LookupOutcome(record=None)
        return LookupOutcome(record=None, network_warning=True)
    except (urllib.error.URLError, OSError, TimeoutError, json.JSONDecodeError):
        return LookupOutcome(record=None, network_warning=True)
    try:
        if doc.get("gtin") != digits:
            return LookupOutcome(record=None, network_warning=True)
        return LookupOutcome(
            record=ProductRecord(
                gtin=doc["gtin"],
                name=doc["name"],
                price_minor=doc.get("price_minor"),
                currency=doc.get("currency"),
            )
        )
    except (KeyError, TypeError, CatalogError):
        return LookupOutcome(record=None, network_warning=True)
