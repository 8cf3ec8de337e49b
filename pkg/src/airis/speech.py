"""Speech boundaries with deterministic mock implementations.

Real speech-to-text and text-to-speech engines are adapter points left
unbuilt; scripted sources and console emission make every session
reproducible.  The noise injector exists to stress the intent router.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, TextIO

from .router import Utterance

# Scripted transcripts reuse the mocked engine's nominal accuracy as a
# constant confidence.
SCRIPTED_CONFIDENCE = 0.95


class IoFailure(Exception):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    substitution_rate: float
    seed: int
    lexicon: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.substitution_rate <= 1.0:
            raise ValueError("substitution_rate must lie in [0, 1]")


class ScriptedSource:
    """Feeds a fixed list of utterance strings, then reports exhaustion."""

    def __init__(self, lines) -> None:
        self._lines = [line for line in lines]
        self._cursor = 0

    def next(self) -> Utterance | None:
        if self._cursor >= len(self._lines):
            return None
        text = self._lines[self._cursor]
        self._cursor += 1
        return Utterance(text=text, confidence=SCRIPTED_CONFIDENCE)


class InteractiveSource:
    """Blocking console reader; EOF means the session is over."""

    def __init__(self, stream: TextIO | None = None, prompt: str = "you> ") -> None:
        self._stream = stream if stream is not None else sys.stdin
        self.prompt = prompt

    def next(self) -> Utterance | None:
        try:
            if self.prompt and self._stream is sys.stdin:
                print(self.prompt, end="", flush=True)
            line = self._stream.readline()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if not line:
            return None
        text = line.strip()
        if not text:
            return self.next()
        return Utterance(text=text)


class TranscriptLog:
    """Append-only log of both sides: 'RFC3339\\t(USER|AIRIS)\\ttext'."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    def append(self, speaker: str, text: str) -> None:
        stamp = datetime.now(timezone.utc).isoformat()
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(f"{stamp}\t{speaker}\t{text}\n")
        except OSError as exc:
            raise IoFailure(f"cannot append transcript: {exc}") from exc


class SpokenOutput:
    """Console/text stand-in for the text-to-speech stage."""

    def __init__(self, stream: TextIO | None = None, log: TranscriptLog | None = None) -> None:
        self.stream = stream
        self.log = log
        self.lines: list[str] = []

    def speak(self, text: str) -> None:
        if not text.strip():
            raise ValueError("refusing to speak empty text")
        self.lines.append(text)
        if self.stream is not None:
            try:
                self.stream.write(f"AIRIS: {text}\n")
                self.stream.flush()
            except OSError as exc:
                raise IoFailure(str(exc)) from exc
        if self.log is not None:
            self.log.append("AIRIS", text)

    def note_user(self, text: str) -> None:
        if self.log is not None:
            self.log.append("USER", text)


def inject_noise(text: str, noise: NoiseConfig, protected=frozenset()) -> str:
    """Word-substitution noise, deterministic per (text, seed).

    Each whitespace token outside the protected set is independently
    substituted with probability `substitution_rate`, using the lexicon
    (identity when the token has no lexicon entry).
    """
    rng = random.Random(noise.seed)
    out = []
    for token in text.split():
        key = token.lower()
        draw = rng.random()
        if key in protected:
            out.append(token)
        elif draw < noise.substitution_rate:
            out.append(noise.lexicon.get(key, token))
        else:
            out.append(token)
    return " ".join(out)
