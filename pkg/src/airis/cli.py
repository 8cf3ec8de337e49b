"""Console entry point: interactive session, scenario runner, gateway
server, tooling subcommands, and the latency benchmark.

Exit codes are fixed: 0 success, 1 scenario/benchmark failure, 2 usage or
parse errors.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from . import barcode as barcode_mod
from .config import AppConfig, ConfigError, load_config, parse_gateway_address
from .faces import FaceRegistry
from .gateway import (
    FixtureEmbeddingSource,
    FixtureEntry,
    FixtureError,
    InProcessClient,
    build_fixture_registry,
    build_proxy_registry,
    load_fixtures,
    pgm_digest,
    serve,
)
from .imaging import ImageFrame, load_pgm, save_pgm
from .notes import NoteStore
from .orchestrator import Session, run_session
from .protocol import DEFAULT_HOST, DEFAULT_PORT, GatewayClient
from .router import IntentKind, RouterConfig, Utterance
from .speech import InteractiveSource, SpokenOutput, TranscriptLog

USAGE_EXIT = 2
FAIL_EXIT = 1


class ScenarioParseError(Exception):
    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class ScenarioStep:
    lineno: int
    directive: str  # "U", "IMG", or "E"
    text: str


def parse_scenario(path: Path) -> list[ScenarioStep]:
    steps: list[ScenarioStep] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        directive, sep, text = line.partition(":")
        directive = directive.strip()
        text = text.strip()
        if not sep or directive not in ("U", "IMG", "E"):
            raise ScenarioParseError(lineno, f"unknown directive {raw.strip()!r}")
        if not text:
            raise ScenarioParseError(lineno, f"{directive}: needs content")
        steps.append(ScenarioStep(lineno=lineno, directive=directive, text=text))
    return steps


def build_session(config: AppConfig, store_dir: Path | None = None) -> Session:
    """Wire a Session from config; transport picks upstream > gateway > in-process."""
    entries: list[FixtureEntry] = []
    if config.fixtures is not None:
        entries = load_fixtures(config.fixtures)
    if config.upstream:
        perception = InProcessClient(
            build_proxy_registry(config.upstream, timeout_ms=config.timeout_ms)
        )
    elif config.gateway:
        perception = GatewayClient(host=config.gateway[0], port=config.gateway[1])
    else:
        perception = InProcessClient(build_fixture_registry(entries))

    registry_path = config.registry
    notes_dir = config.notes_dir
    if store_dir is not None:
        registry_path = registry_path or store_dir / "registry.jsonl"
        notes_dir = notes_dir or store_dir / "notes"

    router_config = (
        RouterConfig.from_file(config.router_config)
        if config.router_config
        else RouterConfig.default(wake_word=config.wake_word)
    )
    catalog = (
        barcode_mod.Catalog.from_csv(config.catalog)
        if config.catalog
        else barcode_mod.Catalog()
    )
    return Session(
        perception,
        router_config=router_config,
        routing=config.routing,
        registry=FaceRegistry(registry_path) if registry_path else FaceRegistry(),
        notes=NoteStore(notes_dir, config.notes_categories) if notes_dir else None,
        catalog=catalog,
        embeddings=FixtureEmbeddingSource(entries),
        currencies=config.currencies,
        budgets=config.budgets,
        battery_pct=config.battery_pct,
        call_timeout_ms=config.timeout_ms,
        catalog_remote_url=config.catalog_remote_url,
    )


def format_trace_table(traces) -> str:
    lines = [
        f"{'intent':<16} {'route':>7} {'backend':>8} {'compose':>8} "
        f"{'total':>8} {'budget':>7}"
    ]
    for trace in traces:
        lines.append(
            f"{trace.intent.value:<16} {trace.route_ms:>7.2f} {trace.backend_ms:>8.2f} "
            f"{trace.compose_ms:>8.2f} {trace.total_ms:>8.2f} {trace.budget_ms:>7.0f}"
        )
    return "\n".join(lines)


def run_scenario(path: Path, config: AppConfig) -> tuple[str, int]:
    """Drive one scenario file; exit code 0 all expectations met, else 1."""
    steps = parse_scenario(path)
    report: list[str] = [f"scenario {path}"]
    failures = 0
    with tempfile.TemporaryDirectory(prefix="airis-scenario-") as scratch:
        session = build_session(config, store_dir=Path(scratch))
        output = SpokenOutput()
        pending: list[str] = []
        consumed = 0
        traces = []
        for step in steps:
            if step.directive == "U":
                reply, trace = session.handle_utterance(Utterance(step.text))
                if trace is not None:
                    traces.append(trace)
                if reply is not None:
                    output.speak(reply)
                    pending.append(reply)
                report.append(f"  line {step.lineno:>3} U: {step.text}")
            elif step.directive == "IMG":
                image_path = (path.parent / step.text).resolve()
                try:
                    session.set_frame(load_pgm(image_path.read_bytes()))
                except (OSError, ValueError) as exc:
                    failures += 1
                    report.append(
                        f"  line {step.lineno:>3} IMG: {step.text} -> FAIL ({exc})"
                    )
                    continue
                report.append(f"  line {step.lineno:>3} IMG: {step.text}")
            else:  # "E"
                if consumed < len(pending):
                    actual = pending[consumed]
                    consumed += 1
                    if step.text in actual:
                        report.append(
                            f"  line {step.lineno:>3} E: {step.text!r} -> PASS"
                        )
                    else:
                        failures += 1
                        report.append(
                            f"  line {step.lineno:>3} E: expected substring "
                            f"{step.text!r}, got {actual!r} -> FAIL"
                        )
                else:
                    failures += 1
                    report.append(
                        f"  line {step.lineno:>3} E: {step.text!r} -> FAIL "
                        f"(no spoken response pending)"
                    )
        report.append("timing:")
        report.append(format_trace_table(traces))
        report.append(
            f"result: {'PASS' if failures == 0 else f'FAIL ({failures} failed steps)'}"
        )
    return "\n".join(report), (0 if failures == 0 else FAIL_EXIT)


@dataclass(frozen=True)
class BenchReport:
    commands: int
    latency_ms: float | None
    total_median_ms: float
    total_p95_ms: float
    overhead_median_ms: float
    overhead_p95_ms: float
    overhead_budget_ms: float

    @property
    def within_budget(self) -> bool:
        return self.overhead_median_ms <= self.overhead_budget_ms

    def render(self) -> str:
        latency = "fixture defaults" if self.latency_ms is None else f"{self.latency_ms} ms"
        verdict = "PASS" if self.within_budget else "FAIL"
        return "\n".join(
            [
                f"benchmark: {self.commands} commands, scene/objects alternating",
                f"simulated model latency: {latency}",
                f"total_ms:    median={self.total_median_ms:.2f} p95={self.total_p95_ms:.2f}",
                f"overhead_ms: median={self.overhead_median_ms:.2f} p95={self.overhead_p95_ms:.2f}",
                f"budget check: overhead median <= {self.overhead_budget_ms:.0f} ms -> {verdict}",
            ]
        )


def _bench_frames() -> tuple[ImageFrame, ImageFrame, list[FixtureEntry]]:
    import numpy as np

    scene = ImageFrame.from_array(
        np.arange(24 * 18, dtype="uint8").reshape(18, 24) % 251
    )
    objects = ImageFrame.from_array(
        (np.arange(24 * 18, dtype="uint8").reshape(18, 24) * 7) % 253
    )
    entries = [
        FixtureEntry(
            kind="scene",
            digest=pgm_digest(save_pgm(scene)),
            result={"caption": "a test bench"},
        ),
        FixtureEntry(
            kind="objects",
            digest=pgm_digest(save_pgm(objects)),
            result={
                "detections": [
                    {"label": "cup", "confidence": 0.9, "bbox": [0.4, 0.4, 0.6, 0.6]}
                ]
            },
        ),
    ]
    return scene, objects, entries


def bench(
    config: AppConfig,
    commands: int = 100,
    latency_ms: float | None = None,
    overhead_budget_ms: float = 10.0,
) -> BenchReport:
    """Measure end-to-end command latency against in-process fixtures.

    The orchestrator path is identical to production; only the transport is
    in-process so the measurement isolates orchestrator overhead.
    """
    scene_frame, objects_frame, entries = _bench_frames()
    dispatcher = build_fixture_registry(entries, force_latency_ms=latency_ms)
    session = Session(InProcessClient(dispatcher), budgets=config.budgets)
    session.handle_utterance(Utterance(session.router_config.wake_word))
    totals: list[float] = []
    overheads: list[float] = []
    for i in range(commands):
        if i % 2 == 0:
            session.set_frame(scene_frame)
            _, trace = session.handle_utterance(Utterance("what do you see"))
        else:
            session.set_frame(objects_frame)
            _, trace = session.handle_utterance(Utterance("identify"))
        totals.append(trace.total_ms)
        overheads.append(trace.total_ms - trace.backend_ms)

    def p95(values):
        ordered = sorted(values)
        return ordered[min(len(ordered) - 1, int(0.95 * len(ordered)))]

    return BenchReport(
        commands=commands,
        latency_ms=latency_ms,
        total_median_ms=statistics.median(totals),
        total_p95_ms=p95(totals),
        overhead_median_ms=statistics.median(overheads),
        overhead_p95_ms=p95(overheads),
        overhead_budget_ms=overhead_budget_ms,
    )


def _interactive_run(config: AppConfig) -> int:
    data_dir = Path("airis-data")
    session = build_session(config, store_dir=data_dir)
    output = SpokenOutput(
        stream=sys.stdout, log=TranscriptLog(data_dir / "transcript.log")
    )
    print("type utterances; 'IMG: <path>' loads a frame; Ctrl-D exits")
    source = InteractiveSource()

    class FrameAwareSource:
        def next(self):
            while True:
                utterance = source.next()
                if utterance is None:
                    return None
                if utterance.text.upper().startswith("IMG:"):
                    image_path = Path(utterance.text[4:].strip())
                    try:
                        session.set_frame(load_pgm(image_path.read_bytes()))
                        print(f"(frame set from {image_path})")
                    except (OSError, ValueError) as exc:
                        print(f"(cannot load frame: {exc})")
                    continue
                return utterance

    run_session(session, FrameAwareSource(), output)
    return 0


def _common_options(default) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", default=default, help="app config JSON")
    parser.add_argument("--gateway", default=default, help="TCP gateway address host:port")
    parser.add_argument(
        "--upstream", default=default, help="HTTP perception service base URL"
    )
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    # Two parent instances: the root one carries real defaults, the
    # subcommand one suppresses them so a pre-subcommand flag survives.
    common = _common_options(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="airis", parents=[_common_options(None)])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="interactive console session")

    scenario = sub.add_parser("scenario", parents=[common], help="run a scripted scenario")
    scenario.add_argument("file", help="scenario file (U:/IMG:/E: lines)")

    server = sub.add_parser("serve", parents=[common], help="run the inference gateway")
    server.add_argument(
        "--bind", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}", help="listen address host:port"
    )
    server.add_argument("--fixtures", dest="fixtures_path", help="fixture JSON file")

    decode = sub.add_parser("decode-barcode", parents=[common], help="decode a PGM barcode")
    decode.add_argument("pgm", help="binary PGM file")
    decode.add_argument("--catalog", dest="catalog_path", help="catalog CSV for lookup")

    enroll = sub.add_parser("enroll-face", parents=[common], help="enroll an embedding")
    enroll.add_argument("name", help="display name")
    enroll.add_argument("embedding_file", help="JSON array of 128 numbers")
    enroll.add_argument("--registry", dest="registry_path", help="registry JSONL path")

    bench_cmd = sub.add_parser("bench", parents=[common], help="latency benchmark")
    bench_cmd.add_argument("--commands", type=int, default=100)
    bench_cmd.add_argument(
        "--latency-ms",
        type=float,
        default=None,
        help="override simulated model latency (default: fixture/kind values)",
    )

    return parser.parse_args(argv)


def _load_app_config(args) -> AppConfig:
    config = load_config(args.config) if args.config else AppConfig()
    if args.gateway:
        config.gateway = parse_gateway_address(args.gateway)
    if args.upstream:
        config.upstream = args.upstream
    return config


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0

    try:
        config = _load_app_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT

    try:
        if args.command == "run":
            return _interactive_run(config)

        if args.command == "scenario":
            try:
                report, code = run_scenario(Path(args.file), config)
            except ScenarioParseError as exc:
                print(f"scenario parse error: {exc}", file=sys.stderr)
                return USAGE_EXIT
            except OSError as exc:
                print(f"cannot read scenario: {exc}", file=sys.stderr)
                return USAGE_EXIT
            print(report)
            return code

        if args.command == "serve":
            host, port = parse_gateway_address(args.bind)
            fixtures_path = args.fixtures_path or config.fixtures
            if not fixtures_path:
                print("serve requires --fixtures or a config with fixtures", file=sys.stderr)
                return USAGE_EXIT
            entries = load_fixtures(fixtures_path)
            dispatcher = build_fixture_registry(entries)
            server = serve((host, port), dispatcher)
            print(f"gateway listening on {server.address[0]}:{server.address[1]}")
            try:
                while True:
                    time.sleep(3600)
            except KeyboardInterrupt:
                server.close()
            return 0

        if args.command == "decode-barcode":
            frame = load_pgm(Path(args.pgm).read_bytes())
            try:
                digits = barcode_mod.decode_image(frame)
            except barcode_mod.BarcodeError as exc:
                print(f"decode failed: {exc}", file=sys.stderr)
                return FAIL_EXIT
            print(digits)
            catalog_path = args.catalog_path or config.catalog
            if catalog_path:
                catalog = barcode_mod.Catalog.from_csv(catalog_path)
                outcome = barcode_mod.lookup(
                    digits, catalog, remote_base_url=config.catalog_remote_url
                )
                if outcome.record:
                    print(f"{outcome.record.name}")
                else:
                    print("(not in catalog)")
            return 0

        if args.command == "enroll-face":
            import json as json_mod

            registry_path = args.registry_path or config.registry
            if not registry_path:
                print("enroll-face requires --registry or a config with one", file=sys.stderr)
                return USAGE_EXIT
            embedding = json_mod.loads(Path(args.embedding_file).read_text())
            registry = FaceRegistry(registry_path)
            person_id = registry.enroll(args.name, embedding)
            print(person_id)
            return 0

        if args.command == "bench":
            if config.gateway:
                client = GatewayClient(host=config.gateway[0], port=config.gateway[1])
                try:
                    reachable = client.health().status == "ok"
                except Exception:  # noqa: BLE001
                    reachable = False
                finally:
                    client.close()
                if not reachable:
                    print("gateway unreachable", file=sys.stderr)
                    return FAIL_EXIT
            report = bench(config, commands=args.commands, latency_ms=args.latency_ms)
            print(report.render())
            return 0 if report.within_budget else FAIL_EXIT
    except (FixtureError, ConfigError, barcode_mod.CatalogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_EXIT

    print(f"unknown command {args.command!r}", file=sys.stderr)
    return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
