"""SRT parsing, cue-text normalization, and canonical serialization."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyTrack, EncodingError

_TIMESTAMP_RE = re.compile(
    r"^(\d{2}):(\d{2}):(\d{2})[,.](\d{3})\s*-->\s*(\d{2}):(\d{2}):(\d{2})[,.](\d{3})\s*(?:\S.*)?$"
)
_COUNTER_RE = re.compile(r"^\d+$")
_TAG_RE = re.compile(r"<[^>]*>")
_LEADING_DASH_RE = re.compile(r"^[-–—]\s+")
_FULLY_BRACKETED_RE = re.compile(r"^(\[.*\]|\(.*\))$")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class SubtitleCue:
    index: int
    start_ms: int
    end_ms: int
    raw_lines: tuple[str, ...]
    clean_text: str


@dataclass(frozen=True)
class SubtitleTrack:
    cues: tuple[SubtitleCue, ...]
    source_name: str = ""
    warnings: tuple[str, ...] = ()


def timestamp_to_ms(h: str, m: str, s: str, ms: str) -> int:
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(ms)


def format_timestamp(ms: int) -> str:
    """Milliseconds to canonical HH:MM:SS,mmm (comma separator)."""
    seconds, millis = divmod(ms, 1000)
    minutes, seconds = divmod(seconds, 60)
    hours, minutes = divmod(minutes, 60)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d},{millis:03d}"


def _clean_line(line: str) -> str | None:
    line = _TAG_RE.sub("", line).strip()
    line = _LEADING_DASH_RE.sub("", line)
    if not line or _FULLY_BRACKETED_RE.match(line):
        return None
    return line


def clean_cue_text(lines: Sequence[str]) -> str:
    """Markup/annotation-free single-line text for token matching.

    Idempotent: cleaning the cleaned text again is a no-op, even when
    dropped sound-annotation lines change what counts as fully bracketed.
    """
    text = _WS_RE.sub(" ", " ".join(filter(None, map(_clean_line, lines)))).strip()
    while True:
        cleaned = _clean_line(text)
        again = _WS_RE.sub(" ", cleaned or "").strip()
        if again == text:
            return text
        text = again


def parse_srt(text: str, source_name: str = "") -> SubtitleTrack:
    """Parse SRT text into a time-sorted track.

    Malformed blocks are skipped with a warning; cues whose start is not
    before their end are dropped with a warning. Raises EmptyTrack when no
    well-formed cue remains.
    """
    if text.startswith("﻿"):
        text = text[1:]

    cues: list[SubtitleCue] = []
    warnings: list[str] = []
    for block_no, block in enumerate(_blocks(text.splitlines()), start=1):
        cue, problem = _parse_block(block)
        if cue is None:
            warnings.append(f"block {block_no}: {problem}, skipped")
            continue
        if cue.start_ms >= cue.end_ms:
            warnings.append(
                f"block {block_no}: TimestampOrder start >= end "
                f"({cue.start_ms} >= {cue.end_ms}), cue dropped"
            )
            continue
        cues.append(cue)

    if not cues:
        raise EmptyTrack(f"no well-formed cues in {source_name or 'input'}")

    if any(cues[i].start_ms > cues[i + 1].start_ms for i in range(len(cues) - 1)):
        cues.sort(key=lambda c: c.start_ms)  # stable
        warnings.append("cues were out of order and have been re-sorted by start time")

    return SubtitleTrack(tuple(cues), source_name, tuple(warnings))


def _blocks(lines: Iterable[str]) -> Iterable[list[str]]:
    block: list[str] = []
    for line in lines:
        if line.strip():
            block.append(line)
        elif block:
            yield block
            block = []
    if block:
        yield block


def _parse_block(block: list[str]) -> tuple[SubtitleCue | None, str]:
    if len(block) < 3:
        return None, "fewer than 3 lines"
    counter = block[0].strip()
    if not _COUNTER_RE.match(counter):
        return None, f"bad counter line {counter!r}"
    match = _TIMESTAMP_RE.match(block[1].strip())
    if not match:
        return None, f"bad timestamp line {block[1].strip()!r}"
    start = timestamp_to_ms(*match.groups()[:4])
    end = timestamp_to_ms(*match.groups()[4:])
    raw_lines = tuple(block[2:])
    return SubtitleCue(int(counter), start, end, raw_lines, clean_cue_text(raw_lines)), ""


def serialize_srt(track: SubtitleTrack) -> str:
    """Canonical SRT text; parse(serialize(t)) reproduces indices,
    timestamps, and raw lines."""
    parts = []
    for cue in track.cues:
        header = f"{cue.index}\n{format_timestamp(cue.start_ms)} --> {format_timestamp(cue.end_ms)}"
        parts.append(header + "\n" + "\n".join(cue.raw_lines))
    return "\n\n".join(parts) + "\n"


def read_srt(path: str | Path) -> SubtitleTrack:
    """Load an .srt file; accepts UTF-8 with optional BOM, rejects the rest."""
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: not valid UTF-8 ({exc})") from None
    return parse_srt(text, source_name=str(path))


def track_to_dict(track: SubtitleTrack) -> dict:
    return {
        "source_name": track.source_name,
        "cues": [
            {
                "index": c.index,
                "start_ms": c.start_ms,
                "end_ms": c.end_ms,
                "raw_lines": list(c.raw_lines),
                "clean_text": c.clean_text,
            }
            for c in track.cues
        ],
        "warnings": list(track.warnings),
    }
