import json

import pytest

from airis.cli import (
    ScenarioParseError,
    bench,
    main,
    parse_args,
    parse_scenario,
    run_scenario,
)
from airis.config import AppConfig, load_config
from airis.gateway import pgm_digest
from airis.imaging import save_pgm
from conftest import FACE_EMBEDDING, FIXTURE_ENTRIES, SCENE_FRAME, TEXT_FRAME


def write_demo_workspace(tmp_path):
    """A miniature config + fixtures + images directory for CLI runs."""
    fixtures = []
    for entry in FIXTURE_ENTRIES:
        doc = {"kind": entry.kind, "digest": entry.digest, "result": entry.result}
        fixtures.append(doc)
    (tmp_path / "fixtures.json").write_text(json.dumps(fixtures))
    (tmp_path / "catalog.csv").write_text(
        "gtin,name,price_minor,currency\n4006381333931,Test Pen,250,EUR\n"
    )
    (tmp_path / "config.json").write_text(
        json.dumps(
            {"wake_word": "iris", "fixtures": "fixtures.json", "catalog": "catalog.csv"}
        )
    )
    images = tmp_path / "images"
    images.mkdir()
    (images / "scene.pgm").write_bytes(save_pgm(SCENE_FRAME))
    (images / "text.pgm").write_bytes(save_pgm(TEXT_FRAME))
    return tmp_path / "config.json"


class TestParseArgs:
    def test_scenario_command(self):
        args = parse_args(["scenario", "s.txt"])
        assert args.command == "scenario" and args.file == "s.txt"

    def test_decode_command(self):
        args = parse_args(["decode-barcode", "x.pgm"])
        assert args.command == "decode-barcode" and args.pgm == "x.pgm"

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            parse_args(["frobnicate"])
        assert exc.value.code == 2
        assert main(["frobnicate"]) == 2

    def test_global_flag_positions(self):
        before = parse_args(["--config", "a.json", "bench"])
        after = parse_args(["bench", "--config", "a.json"])
        assert before.config == after.config == "a.json"


class TestScenarioParsing:
    def test_directives_and_comments(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("# comment\nU: iris\n\nIMG: img.pgm\nE: battery\n")
        steps = parse_scenario(path)
        assert [s.directive for s in steps] == ["U", "IMG", "E"]

    def test_unknown_directive_reports_line(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("U: iris\nX: what\n")
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario(path)
        assert exc.value.lineno == 2

    def test_parse_error_exit_code_2(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("WAT\n")
        assert main(["scenario", str(path)]) == 2


class TestScenarioRun:
    def test_greeting_contains_battery(self, tmp_path, capsys):
        config_path = write_demo_workspace(tmp_path)
        scenario = tmp_path / "wake.txt"
        scenario.write_text("U: iris\nE: battery\nU: goodbye\nE: Goodbye\n")
        assert main(["--config", str(config_path), "scenario", str(scenario)]) == 0
        out = capsys.readouterr().out
        assert "result: PASS" in out

    def test_failed_expectation_exits_1_with_diff(self, tmp_path, capsys):
        config_path = write_demo_workspace(tmp_path)
        scenario = tmp_path / "scene.txt"
        scenario.write_text(
            "U: iris\nE: battery\nIMG: images/scene.pgm\nU: what do you see\nE: unicorn\n"
        )
        assert main(["--config", str(config_path), "scenario", str(scenario)]) == 1
        out = capsys.readouterr().out
        assert "expected substring 'unicorn'" in out
        assert "It looks like" in out

    def test_trace_rows_match_active_say_steps(self, tmp_path):
        config_path = write_demo_workspace(tmp_path)
        scenario = tmp_path / "t.txt"
        scenario.write_text(
            "U: ignored while dormant\nU: iris\nE: battery\nU: status\nE: battery\n"
        )
        report, code = run_scenario(scenario, load_config(config_path))
        assert code == 0
        table = report[report.index("timing:") :]
        rows = [l for l in table.splitlines()[2:] if l.strip() and "result" not in l]
        assert len(rows) == 2  # dormant non-wake input leaves no trace

    def test_scenario_is_deterministic_across_runs(self, tmp_path):
        config_path = write_demo_workspace(tmp_path)
        scenario = tmp_path / "repeat.txt"
        scenario.write_text(
            "U: iris\nE: battery\nU: who is this\nE: camera frame\n"
            "U: goodbye\nE: Goodbye\n"
        )
        config = load_config(config_path)
        # Fresh scratch stores per run: the second run must behave identically.
        _, first = run_scenario(scenario, config)
        _, second = run_scenario(scenario, config)
        assert first == second == 0


class TestBench:
    def test_zero_latency_overhead_budget(self):
        report = bench(AppConfig(), commands=20, latency_ms=0.0)
        assert report.within_budget
        assert report.total_median_ms <= 10.0

    def test_report_includes_both_columns(self):
        report = bench(AppConfig(), commands=10, latency_ms=0.0)
        text = report.render()
        assert "total_ms" in text and "overhead_ms" in text

    def test_latency_floor_respected(self):
        report = bench(AppConfig(), commands=6, latency_ms=30.0)
        assert report.total_median_ms >= 30.0
        assert report.total_median_ms <= 40.0


class TestTools:
    def test_decode_barcode_with_catalog(self, tmp_path, capsys):
        from airis.barcode import encode_scanline
        from airis.imaging import ImageFrame

        config_path = write_demo_workspace(tmp_path)
        line = encode_scanline("4006381333931", module_px=2)
        frame = ImageFrame(width=len(line), height=12, pixels=bytes(line) * 12)
        pgm = tmp_path / "code.pgm"
        pgm.write_bytes(save_pgm(frame))
        assert main(["--config", str(config_path), "decode-barcode", str(pgm)]) == 0
        out = capsys.readouterr().out
        assert "4006381333931" in out and "Test Pen" in out

    def test_decode_barcode_failure_exits_1(self, tmp_path, capsys):
        pgm = tmp_path / "blank.pgm"
        pgm.write_bytes(save_pgm(SCENE_FRAME))
        assert main(["decode-barcode", str(pgm)]) == 1

    def test_enroll_face_cli(self, tmp_path, capsys):
        emb_file = tmp_path / "emb.json"
        emb_file.write_text(json.dumps(FACE_EMBEDDING))
        registry = tmp_path / "reg.jsonl"
        code = main(
            ["enroll-face", "Maria", str(emb_file), "--registry", str(registry)]
        )
        assert code == 0
        assert registry.exists() and len(registry.read_text().splitlines()) == 1

    def test_bad_config_exits_2(self, tmp_path):
        bad = tmp_path / "config.json"
        bad.write_text('{"no_such_key": 1}')
        assert main(["--config", str(bad), "bench"]) == 2
