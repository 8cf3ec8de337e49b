"""Application config: one JSON file wiring the whole edge session together.

Relative paths resolve against the config file's own directory, so a config
can travel with its fixture and catalog files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .money import CurrencySpec, DEFAULT_CURRENCIES
from .notes import DEFAULT_CATEGORIES
from .router import IntentKind


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "wake_word",
    "router_config",
    "routing",
    "fixtures",
    "catalog",
    "catalog_remote_url",
    "registry",
    "notes_dir",
    "notes_categories",
    "currencies",
    "budgets",
    "battery_pct",
    "gateway",
    "upstream",
    "timeout_ms",
}


@dataclass
class AppConfig:
    wake_word: str = "iris"
    router_config: Path | None = None
    routing: dict = field(default_factory=dict)  # IntentKind -> placement string
    fixtures: Path | None = None
    catalog: Path | None = None
    catalog_remote_url: str | None = None
    registry: Path | None = None
    notes_dir: Path | None = None
    notes_categories: tuple = DEFAULT_CATEGORIES
    currencies: tuple = DEFAULT_CURRENCIES
    budgets: dict = field(default_factory=dict)  # IntentKind -> budget ms
    battery_pct: int | None = None
    gateway: tuple | None = None  # (host, port) for TCP transport
    upstream: str | None = None  # base URL for HTTP proxy backends
    timeout_ms: float = 2000.0


def parse_gateway_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"gateway address {text!r} must be host:port")
    return host, int(port)


def _parse_currencies(doc) -> tuple:
    specs = []
    for code, spec in doc.items():
        extra = set(spec) - {"markers", "values", "minor_per_major", "singular", "plural"}
        if extra:
            raise ConfigError(f"currency {code}: unknown keys {sorted(extra)}")
        specs.append(
            CurrencySpec(
                code=code,
                markers=frozenset(str(m).upper() for m in spec.get("markers", [])),
                note_values=tuple(spec.get("values", [])),
                minor_per_major=spec.get("minor_per_major", 100),
                singular=spec.get("singular", ""),
                plural=spec.get("plural", ""),
            )
        )
    return tuple(specs)


def _intent_map(doc: dict, value_parser) -> dict:
    by_value = {k.value: k for k in IntentKind}
    out = {}
    for name, value in doc.items():
        if name not in by_value:
            raise ConfigError(f"unknown intent kind {name!r}")
        out[by_value[name]] = value_parser(value)
    return out


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = path.parent

    def resolve(key):
        value = doc.get(key)
        return (base / value) if value is not None else None

    config = AppConfig()
    config.wake_word = doc.get("wake_word", config.wake_word)
    config.router_config = resolve("router_config")
    config.fixtures = resolve("fixtures")
    config.catalog = resolve("catalog")
    config.catalog_remote_url = doc.get("catalog_remote_url")
    config.registry = resolve("registry")
    config.notes_dir = resolve("notes_dir")
    if "notes_categories" in doc:
        config.notes_categories = tuple(doc["notes_categories"])
    if "currencies" in doc:
        config.currencies = _parse_currencies(doc["currencies"])
    if "routing" in doc:
        config.routing = _intent_map(doc["routing"], str)
    if "budgets" in doc:
        config.budgets = _intent_map(doc["budgets"], float)
    if "battery_pct" in doc:
        pct = doc["battery_pct"]
        if not isinstance(pct, int) or not 0 <= pct <= 100:
            raise ConfigError("battery_pct must be an integer in [0, 100]")
        config.battery_pct = pct
    if "gateway" in doc and doc["gateway"]:
        config.gateway = parse_gateway_address(doc["gateway"])
    config.upstream = doc.get("upstream")
    if "timeout_ms" in doc:
        config.timeout_ms = float(doc["timeout_ms"])
    return config
