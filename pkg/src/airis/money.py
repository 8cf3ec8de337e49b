"""Turn OCR tokens into banknote denominations and a spoken total.

Notes print their value several times, so one OCR line yields at most one
denomination: the first number that is legal for a currency whose marker
also appears on that line.  All arithmetic is in integer minor units.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field

MIN_TOKEN_CONFIDENCE = 0.4


@dataclass(frozen=True)
class OcrToken:
    text: str
    line_index: int
    confidence: float = 1.0
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("token text is empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class CurrencySpec:
    code: str
    markers: frozenset[str]
    note_values: tuple[int, ...]  # legal values in major units
    minor_per_major: int = 100
    singular: str = ""
    plural: str = ""

    def spoken(self, count: float) -> str:
        if not self.singular:
            return self.code
        return self.singular if count == 1 else self.plural


DEFAULT_CURRENCIES: tuple[CurrencySpec, ...] = (
    CurrencySpec(
        code="EUR",
        markers=frozenset({"EURO", "EUROS", "EUR", "€"}),
        note_values=(5, 10, 20, 50, 100, 200, 500),
        singular="euro",
        plural="euros",
    ),
    CurrencySpec(
        code="USD",
        markers=frozenset({"DOLLAR", "DOLLARS", "USD", "$"}),
        note_values=(1, 2, 5, 10, 20, 50, 100),
        singular="dollar",
        plural="dollars",
    ),
)

NUMBER_WORDS = (
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen", "twenty",
)


def count_word(n: int) -> str:
    return NUMBER_WORDS[n - 1] if 1 <= n <= 20 else str(n)


def _word_pattern(currencies) -> re.Pattern:
    symbols = {
        marker
        for spec in currencies
        for marker in spec.markers
        if len(marker) == 1 and not marker.isalnum()
    }
    symbol_class = f"|[{re.escape(''.join(sorted(symbols)))}]" if symbols else ""
    return re.compile(rf"[A-Z]+|[0-9]+{symbol_class}")


def parse_denominations(
    tokens, currencies: tuple[CurrencySpec, ...] = DEFAULT_CURRENCIES
) -> list[tuple[str, int]]:
    """Extract (currency code, value in minor units) pairs, one per OCR line."""
    pattern = _word_pattern(currencies)
    lines: dict[int, list[str]] = defaultdict(list)
    for token in tokens:
        if token.confidence < MIN_TOKEN_CONFIDENCE:
            continue
        lines[token.line_index].extend(pattern.findall(token.text.upper()))

    found: list[tuple[str, int]] = []
    for line_index in sorted(lines):
        words = lines[line_index]
        marker_position: dict[str, int] = {}
        for position, word in enumerate(words):
            for spec in currencies:
                if word in spec.markers and spec.code not in marker_position:
                    marker_position[spec.code] = position
        for word in words:
            if not word.isdigit():
                continue
            value = int(word)
            candidates = [
                (marker_position[spec.code], spec)
                for spec in currencies
                if value in spec.note_values and spec.code in marker_position
            ]
            if candidates:
                _, spec = min(candidates, key=lambda item: item[0])
                found.append((spec.code, value * spec.minor_per_major))
                break  # one denomination per line
    return found


@dataclass(frozen=True)
class CurrencyTotal:
    currency: str
    total_minor: int
    breakdown: dict = field(default_factory=dict)  # value_minor -> count

    def __post_init__(self) -> None:
        computed = sum(value * count for value, count in self.breakdown.items())
        if computed != self.total_minor:
            raise ValueError("total does not match breakdown")
        if any(count < 0 for count in self.breakdown.values()):
            raise ValueError("negative counts")


@dataclass(frozen=True)
class MoneyCount:
    per_currency: dict = field(default_factory=dict)  # code -> CurrencyTotal

    @property
    def is_empty(self) -> bool:
        return not self.per_currency


def aggregate(denominations) -> MoneyCount:
    grouped: dict[str, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for code, value_minor in denominations:
        grouped[code][value_minor] += 1
    return MoneyCount(
        per_currency={
            code: CurrencyTotal(
                currency=code,
                total_minor=sum(v * c for v, c in breakdown.items()),
                breakdown=dict(breakdown),
            )
            for code, breakdown in grouped.items()
        }
    )


def _major_text(total_minor: int, minor_per_major: int) -> str:
    major, minor = divmod(total_minor, minor_per_major)
    if minor == 0:
        return str(major)
    width = len(str(minor_per_major - 1))
    return f"{major}.{minor:0{width}d}"


def describe(
    count: MoneyCount, currencies: tuple[CurrencySpec, ...] = DEFAULT_CURRENCIES
) -> str:
    """One sentence per currency, currencies ordered by code."""
    if count.is_empty:
        return "I could not identify any money."
    specs = {spec.code: spec for spec in currencies}
    sentences = []
    for code in sorted(count.per_currency):
        entry = count.per_currency[code]
        spec = specs.get(
            code, CurrencySpec(code=code, markers=frozenset(), note_values=())
        )
        total_text = _major_text(entry.total_minor, spec.minor_per_major)
        total_major = entry.total_minor / spec.minor_per_major
        items = []
        for value_minor in sorted(entry.breakdown, reverse=True):
            note_count = entry.breakdown[value_minor]
            value_text = _major_text(value_minor, spec.minor_per_major)
            unit = spec.spoken(1)
            noun = "note" if note_count == 1 else "notes"
            items.append(f"{count_word(note_count)} {value_text} {unit} {noun}")
        if len(items) > 1:
            listing = ", ".join(items[:-1]) + " and " + items[-1]
        else:
            listing = items[0]
        sentences.append(
            f"You have {total_text} {spec.spoken(total_major)}: {listing}."
        )
    return " ".join(sentences)
