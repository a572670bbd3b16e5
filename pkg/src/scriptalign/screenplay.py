"""Screenplay parsing: line classification, scene structure, dialogue blocks."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyInput


class ElementKind(str, Enum):
    SCENE_HEADING = "scene_heading"
    CHARACTER = "character"
    PARENTHETICAL = "parenthetical"
    DIALOGUE = "dialogue"
    ACTION = "action"
    TRANSITION = "transition"


@dataclass(frozen=True)
class ScreenplayConfig:
    """Indentation thresholds for line classification.

    Transcriptions vary in layout; the defaults suit the common
    10-column dialogue / 25-column character convention.
    """

    dialogue_indent_min: int = 10
    character_indent_min: int = 25


DEFAULT_CONFIG = ScreenplayConfig()

_SLUG_PREFIXES = ("INT.", "EXT.", "INT./EXT.", "I/E.")
_PAGE_NUMBER_RE = re.compile(r"^\d+\.?$")
_CONTINUED_MARKERS = ("CONTINUED", "(CONTINUED)")
_TRAILING_PAREN_RE = re.compile(r"\s*\([^()]*\)\s*$")

_MAX_CHARACTER_LEN = 40
_MIN_UPPER_RATIO = 0.8


@dataclass(frozen=True)
class ScreenplayElement:
    kind: ElementKind
    text: str
    line_span: tuple[int, int]  # inclusive 1-based source line numbers
    indent: int


@dataclass(frozen=True)
class SceneRange:
    scene_index: int
    heading_index: int | None  # element index of the slugline, None before the first one
    element_range: tuple[int, int]  # half-open range into Screenplay.elements


@dataclass(frozen=True)
class Screenplay:
    elements: tuple[ScreenplayElement, ...]
    scenes: tuple[SceneRange, ...]
    total_lines: int
    blank_lines: int
    discarded_lines: int
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class DialogueBlock:
    speaker: str
    cue: str | None  # first delivery parenthetical of the block, parens included
    lines: tuple[str, ...]
    scene_index: int
    element_range: tuple[int, int]  # half-open; Dialogue/Parenthetical elements only


def classify_line(
    line: str,
    indent: int,
    prev_kind: ElementKind | None,
    next_indent: int | None = None,
    config: ScreenplayConfig = DEFAULT_CONFIG,
) -> ElementKind:
    """Classify one non-blank screenplay line.

    ``next_indent`` is the indent of the following non-blank line; it
    separates character cues from shouted one-off action lines. Pass -1
    when no line follows, or leave it None when unknown (the lookahead is
    then assumed to pass). Total function: anything unmatched is Action.
    """
    text = line.strip()
    if text.upper().startswith(_SLUG_PREFIXES):
        return ElementKind.SCENE_HEADING
    if (text.isupper() and text.endswith("TO:")) or text in ("FADE OUT.", "FADE IN:"):
        return ElementKind.TRANSITION
    if _is_character_cue(text, indent, next_indent, config):
        return ElementKind.CHARACTER
    if (
        text.startswith("(")
        and text.endswith(")")
        and prev_kind
        in (ElementKind.CHARACTER, ElementKind.DIALOGUE, ElementKind.PARENTHETICAL)
    ):
        return ElementKind.PARENTHETICAL
    if (
        config.dialogue_indent_min <= indent < config.character_indent_min
        and prev_kind
        in (ElementKind.CHARACTER, ElementKind.PARENTHETICAL, ElementKind.DIALOGUE)
    ):
        return ElementKind.DIALOGUE
    return ElementKind.ACTION


def _is_character_cue(
    text: str, indent: int, next_indent: int | None, config: ScreenplayConfig
) -> bool:
    if indent < config.character_indent_min or len(text) > _MAX_CHARACTER_LEN:
        return False
    letters = [c for c in text if c.isalpha()]
    if not letters:
        return False
    if sum(1 for c in letters if c.isupper()) / len(letters) < _MIN_UPPER_RATIO:
        return False
    if next_indent is None:
        return True
    # a character cue must be followed by dialogue-indented material
    return next_indent >= config.dialogue_indent_min


def _is_page_artifact(text: str) -> bool:
    return bool(_PAGE_NUMBER_RE.match(text)) or text in _CONTINUED_MARKERS


def parse_screenplay(
    text: str, config: ScreenplayConfig = DEFAULT_CONFIG
) -> Screenplay:
    """Parse raw screenplay text into classified elements and scene ranges.

    Blank lines and page artifacts (bare page numbers, CONTINUED markers)
    are discarded but counted, so that element line spans plus both
    counters cover every source line exactly once.
    """
    raw_lines = text.splitlines()
    total = len(raw_lines)

    content: list[tuple[int, str, int]] = []  # (1-based line number, text, indent)
    blank = 0
    discarded = 0
    for lineno, raw in enumerate(raw_lines, start=1):
        expanded = raw.expandtabs(8)
        stripped = expanded.strip()
        if not stripped:
            blank += 1
            continue
        if _is_page_artifact(stripped):
            discarded += 1
            continue
        indent = len(expanded) - len(expanded.lstrip(" "))
        content.append((lineno, stripped, indent))

    if blank == total:
        raise EmptyInput("screenplay text has no non-blank lines")

    elements: list[ScreenplayElement] = []
    warnings: list[str] = []
    prev_kind: ElementKind | None = None
    for pos, (lineno, line, indent) in enumerate(content):
        next_indent = content[pos + 1][2] if pos + 1 < len(content) else -1
        kind = classify_line(line, indent, prev_kind, next_indent, config)
        if kind is ElementKind.ACTION and indent >= config.dialogue_indent_min:
            warnings.append(
                f"line {lineno}: indented line matched no layout rule, kept as action"
            )
        elements.append(ScreenplayElement(kind, line, (lineno, lineno), indent))
        prev_kind = kind

    scenes: list[SceneRange] = []
    scene_start = 0
    heading_idx: int | None = None
    for idx, element in enumerate(elements):
        if element.kind is ElementKind.SCENE_HEADING:
            if idx > scene_start:
                scenes.append(SceneRange(len(scenes), heading_idx, (scene_start, idx)))
            scene_start = idx
            heading_idx = idx
    if elements:
        scenes.append(SceneRange(len(scenes), heading_idx, (scene_start, len(elements))))

    return Screenplay(
        elements=tuple(elements),
        scenes=tuple(scenes),
        total_lines=total,
        blank_lines=blank,
        discarded_lines=discarded,
        warnings=tuple(warnings),
    )


def normalize_speaker(name: str) -> str:
    """Uppercase a character cue and strip trailing parentheticals like (CONT'D)."""
    out = name.strip()
    while True:
        stripped = _TRAILING_PAREN_RE.sub("", out)
        if stripped == out:
            break
        out = stripped
    return out.strip().upper()


def scene_of_element(sp: Screenplay) -> dict[int, int]:
    """Map each element index to its scene_index."""
    lookup: dict[int, int] = {}
    for scene in sp.scenes:
        for idx in range(*scene.element_range):
            lookup[idx] = scene.scene_index
    return lookup


def extract_dialogue_blocks(sp: Screenplay) -> list[DialogueBlock]:
    """Group Dialogue/Parenthetical runs under their Character cues.

    A dialogue run with no immediately preceding Character cue in the same
    scene becomes a speaker="UNKNOWN" block; callers can count those as
    warnings.
    """
    scene_of = scene_of_element(sp)
    blocks: list[DialogueBlock] = []
    n = len(sp.elements)
    i = 0
    while i < n:
        element = sp.elements[i]
        if element.kind is ElementKind.CHARACTER:
            run_start = i + 1
            run_end = _run_end(sp, scene_of, run_start, scene_of[i])
            block = _make_block(sp, normalize_speaker(element.text), run_start, run_end, scene_of[i])
            if block:
                blocks.append(block)
            i = max(run_end, i + 1)
        elif element.kind in (ElementKind.DIALOGUE, ElementKind.PARENTHETICAL):
            run_end = _run_end(sp, scene_of, i, scene_of[i])
            block = _make_block(sp, "UNKNOWN", i, run_end, scene_of[i])
            if block:
                blocks.append(block)
            i = run_end
        else:
            i += 1
    return blocks


def _run_end(sp: Screenplay, scene_of: dict[int, int], start: int, scene: int) -> int:
    j = start
    while (
        j < len(sp.elements)
        and sp.elements[j].kind in (ElementKind.DIALOGUE, ElementKind.PARENTHETICAL)
        and scene_of[j] == scene
    ):
        j += 1
    return j


def _make_block(
    sp: Screenplay, speaker: str, start: int, end: int, scene: int
) -> DialogueBlock | None:
    lines = tuple(
        sp.elements[k].text
        for k in range(start, end)
        if sp.elements[k].kind is ElementKind.DIALOGUE
    )
    if not lines:
        return None
    cue = next(
        (
            sp.elements[k].text
            for k in range(start, end)
            if sp.elements[k].kind is ElementKind.PARENTHETICAL
        ),
        None,
    )
    return DialogueBlock(speaker or "UNKNOWN", cue, lines, scene, (start, end))


def block_warnings(blocks: list[DialogueBlock]) -> list[str]:
    """Orphan-dialogue warnings derived from extracted blocks."""
    return [
        f"dialogue at elements {b.element_range} has no character cue"
        for b in blocks
        if b.speaker == "UNKNOWN"
    ]


def to_dict(sp: Screenplay) -> dict:
    """JSON-ready representation (stable key order)."""
    return {
        "elements": [
            {
                "kind": e.kind.value,
                "text": e.text,
                "line_span": list(e.line_span),
                "indent": e.indent,
            }
            for e in sp.elements
        ],
        "scenes": [
            {
                "scene_index": s.scene_index,
                "heading_index": s.heading_index,
                "element_range": list(s.element_range),
            }
            for s in sp.scenes
        ],
        "total_lines": sp.total_lines,
        "blank_lines": sp.blank_lines,
        "discarded_lines": sp.discarded_lines,
        "warnings": list(sp.warnings),
    }


def from_dict(data: dict) -> Screenplay:
    return Screenplay(
        elements=tuple(
            ScreenplayElement(
                ElementKind(e["kind"]),
                e["text"],
                (e["line_span"][0], e["line_span"][1]),
                e["indent"],
            )
            for e in data["elements"]
        ),
        scenes=tuple(
            SceneRange(
                s["scene_index"],
                s["heading_index"],
                (s["element_range"][0], s["element_range"][1]),
            )
            for s in data["scenes"]
        ),
        total_lines=data["total_lines"],
        blank_lines=data["blank_lines"],
        discarded_lines=data["discarded_lines"],
        warnings=tuple(data["warnings"]),
    )


def block_to_dict(block: DialogueBlock) -> dict:
    return {
        "speaker": block.speaker,
        "cue": block.cue,
        "lines": list(block.lines),
        "scene_index": block.scene_index,
        "element_range": list(block.element_range),
    }
