import io

import pytest

from airis.speech import (
    SCRIPTED_CONFIDENCE,
    NoiseConfig,
    ScriptedSource,
    SpokenOutput,
    TranscriptLog,
    inject_noise,
)


class TestScriptedSource:
    def test_sequence_then_exhaustion(self):
        source = ScriptedSource(["hello"])
        utt = source.next()
        assert utt is not None and utt.text == "hello"
        assert source.next() is None

    def test_empty_script(self):
        assert ScriptedSource([]).next() is None

    def test_confidence_constant(self):
        assert ScriptedSource(["a"]).next().confidence == SCRIPTED_CONFIDENCE == 0.95


class TestSpokenOutput:
    def test_speak_logs_and_prefixes(self, tmp_path):
        stream = io.StringIO()
        log = TranscriptLog(tmp_path / "transcript.log")
        out = SpokenOutput(stream=stream, log=log)
        out.speak("Hello")
        assert stream.getvalue() == "AIRIS: Hello\n"
        line = (tmp_path / "transcript.log").read_text().splitlines()[0]
        fields = line.split("\t")
        assert fields[1] == "AIRIS" and fields[2] == "Hello"

    def test_order_preserved(self, tmp_path):
        log = TranscriptLog(tmp_path / "t.log")
        out = SpokenOutput(log=log)
        out.speak("first")
        out.speak("second")
        texts = [l.split("\t")[2] for l in (tmp_path / "t.log").read_text().splitlines()]
        assert texts == ["first", "second"]
        assert out.lines == ["first", "second"]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            SpokenOutput().speak("   ")

    def test_user_lines_logged(self, tmp_path):
        log = TranscriptLog(tmp_path / "t.log")
        out = SpokenOutput(log=log)
        out.note_user("what do you see")
        out.speak("a reply")
        speakers = [
            l.split("\t")[1] for l in (tmp_path / "t.log").read_text().splitlines()
        ]
        assert speakers == ["USER", "AIRIS"]


class TestNoise:
    LEX = {"please": "kindly", "now": "today", "there": "here"}

    def test_rate_zero_identity(self):
        cfg = NoiseConfig(substitution_rate=0.0, seed=1, lexicon=self.LEX)
        assert inject_noise("please read now", cfg) == "please read now"

    def test_deterministic(self):
        cfg = NoiseConfig(substitution_rate=0.5, seed=99, lexicon=self.LEX)
        first = inject_noise("please read this now please", cfg)
        second = inject_noise("please read this now please", cfg)
        assert first == second

    def test_rate_one_substitutes_every_lexicon_token(self):
        cfg = NoiseConfig(substitution_rate=1.0, seed=3, lexicon=self.LEX)
        assert inject_noise("please now there", cfg) == "kindly today here"

    def test_protected_tokens_untouched(self):
        cfg = NoiseConfig(
            substitution_rate=1.0, seed=3, lexicon={"read": "feed", "now": "today"}
        )
        out = inject_noise("read now", cfg, protected=frozenset({"read"}))
        assert out == "read today"

    def test_token_absent_from_lexicon_kept(self):
        cfg = NoiseConfig(substitution_rate=1.0, seed=3, lexicon={})
        assert inject_noise("zebra quilt", cfg) == "zebra quilt"

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            NoiseConfig(substitution_rate=1.5, seed=0)
