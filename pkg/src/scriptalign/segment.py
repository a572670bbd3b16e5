"""Map story frame time ranges onto aligned script segments and render
the script context consumed by downstream story generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .align import (
    AlignedSegment,
    AlignmentResult,
    AttributedLine,
    segment_lines,
)
from .errors import InputError, MovieMismatch
from .screenplay import (
    DialogueBlock,
    ElementKind,
    Screenplay,
    extract_dialogue_blocks,
)
from .subtitle import format_timestamp

EMPTY_CONTEXT_SENTINEL = "NO ALIGNED SCRIPT CONTEXT"


@dataclass(frozen=True)
class FrameRange:
    story_id: str
    movie_id: str
    start_ms: int
    end_ms: int


@dataclass(frozen=True)
class ContextSegment:
    segment: AlignedSegment
    scene_index: int
    lines: tuple[AttributedLine, ...]
    cues: tuple[str | None, ...]  # delivery cue of each line's block, parallel to lines


@dataclass(frozen=True)
class ActionLine:
    scene_index: int
    text: str


@dataclass(frozen=True)
class StoryScriptContext:
    story_id: str
    segments: tuple[ContextSegment, ...]
    action_lines: tuple[ActionLine, ...]
    delivery_cues: tuple[tuple[str, str], ...]
    untimed_blocks: tuple[DialogueBlock, ...]
    scene_headings: tuple[tuple[int, str | None], ...]
    empty: bool


@dataclass(frozen=True)
class StoryRecord:
    story_id: str
    movie_id: str
    frame_files: tuple[str, ...]
    start_ms: int
    end_ms: int
    cot_text: str | None = None
    story_text: str | None = None


REQUIRED_STORY_FIELDS = ("story_id", "movie_id", "frame_files", "start_ms", "end_ms")


def extract_context(
    frame_range: FrameRange,
    result: AlignmentResult,
    sp: Screenplay,
    pad_ms: int = 0,
) -> StoryScriptContext:
    """Collect every aligned segment whose padded span intersects the
    frame range, plus the action lines, delivery cues, and untimed blocks
    of the scenes those segments live in."""
    if pad_ms < 0:
        raise ValueError(f"pad_ms must be >= 0, got {pad_ms}")
    if (
        result.movie_id is not None
        and frame_range.movie_id
        and result.movie_id != frame_range.movie_id
    ):
        raise MovieMismatch(
            f"story {frame_range.story_id} is from movie {frame_range.movie_id!r}, "
            f"alignment is for {result.movie_id!r}"
        )

    blocks = extract_dialogue_blocks(sp)
    for seg in result.segments:
        if seg.block_indices[1] > len(blocks):
            raise InputError(
                f"alignment references block range {seg.block_indices} but the "
                f"screenplay yields only {len(blocks)} dialogue blocks"
            )
    included = [
        seg
        for seg in result.segments
        if seg.start_ms - pad_ms <= frame_range.end_ms
        and frame_range.start_ms <= seg.end_ms + pad_ms
    ]

    context_segments = []
    scenes: set[int] = set()
    for seg in included:
        scene = blocks[seg.block_indices[0]].scene_index
        scenes.add(scene)
        lines = segment_lines(seg, blocks)
        cues = tuple(
            blocks[bi].cue for bi in range(*seg.block_indices) for _ in blocks[bi].lines
        )
        context_segments.append(ContextSegment(seg, scene, tuple(lines), cues))

    action_lines = tuple(
        ActionLine(scene.scene_index, sp.elements[idx].text)
        for scene in sp.scenes
        if scene.scene_index in scenes
        for idx in range(*scene.element_range)
        if sp.elements[idx].kind is ElementKind.ACTION
    )
    delivery_cues = tuple(
        (b.speaker, b.cue) for b in blocks if b.scene_index in scenes and b.cue
    )
    unaligned = set(result.unaligned_blocks)
    untimed = tuple(
        b for bi, b in enumerate(blocks) if b.scene_index in scenes and bi in unaligned
    )
    headings = tuple(
        (
            scene.scene_index,
            sp.elements[scene.heading_index].text if scene.heading_index is not None else None,
        )
        for scene in sp.scenes
        if scene.scene_index in scenes
    )

    return StoryScriptContext(
        story_id=frame_range.story_id,
        segments=tuple(context_segments),
        action_lines=action_lines,
        delivery_cues=delivery_cues,
        untimed_blocks=untimed,
        scene_headings=headings,
        empty=not included,
    )


def _dialogue_line(speaker: str, cue: str | None, text: str, span: str) -> str:
    cue_part = f" {cue}" if cue else ""
    return f"{speaker}{cue_part}: {text} [{span}]"


def render_context(ctx: StoryScriptContext) -> str:
    """Deterministic text rendering, scene by scene in ascending order."""
    if ctx.empty:
        return EMPTY_CONTEXT_SENTINEL
    heading_by_scene = dict(ctx.scene_headings)
    parts = []
    for scene in sorted(heading_by_scene):
        lines: list[str] = []
        if heading_by_scene[scene]:
            lines.append(heading_by_scene[scene])
        lines.extend(a.text for a in ctx.action_lines if a.scene_index == scene)
        for cseg in ctx.segments:
            if cseg.scene_index != scene:
                continue
            for line, cue in zip(cseg.lines, cseg.cues):
                span = f"{format_timestamp(line.start_ms)}–{format_timestamp(line.end_ms)}"
                lines.append(_dialogue_line(line.speaker, cue, line.text, span))
        for block in ctx.untimed_blocks:
            if block.scene_index != scene:
                continue
            lines.extend(
                _dialogue_line(block.speaker, block.cue, text, "UNTIMED")
                for text in block.lines
            )
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def frame_range_of(record: StoryRecord) -> FrameRange:
    return FrameRange(record.story_id, record.movie_id, record.start_ms, record.end_ms)


def parse_story_record(data: dict, where: str = "record") -> StoryRecord:
    missing = [k for k in REQUIRED_STORY_FIELDS if k not in data]
    if missing:
        raise InputError(f"{where}: missing fields: {', '.join(missing)}")
    start_ms, end_ms = data["start_ms"], data["end_ms"]
    if not (isinstance(start_ms, int) and isinstance(end_ms, int)):
        raise InputError(f"{where}: start_ms/end_ms must be integers")
    if start_ms < 0 or end_ms < start_ms:
        raise InputError(f"{where}: need 0 <= start_ms <= end_ms, got {start_ms}..{end_ms}")
    frame_files = data["frame_files"]
    if not isinstance(frame_files, list) or not all(isinstance(f, str) for f in frame_files):
        raise InputError(f"{where}: frame_files must be a list of strings")
    return StoryRecord(
        story_id=str(data["story_id"]),
        movie_id=str(data["movie_id"]),
        frame_files=tuple(frame_files),
        start_ms=start_ms,
        end_ms=end_ms,
        cot_text=data.get("cot_text"),
        story_text=data.get("story_text"),
    )


def load_story_records(path: str | Path) -> list[StoryRecord]:
    """Read the story ingestion JSONL (one record per line)."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid JSON ({exc})") from None
        records.append(parse_story_record(data, where=f"{path}:{lineno}"))
    return records


def context_to_dict(ctx: StoryScriptContext) -> dict:
    return {
        "story_id": ctx.story_id,
        "empty": ctx.empty,
        "segments": [
            {
                "block_range": list(cs.segment.block_indices),
                "cue_range": list(cs.segment.cue_indices),
                "start_ms": cs.segment.start_ms,
                "end_ms": cs.segment.end_ms,
                "score": cs.segment.score,
                "scene_index": cs.scene_index,
                "lines": [
                    {
                        "speaker": line.speaker,
                        "cue": cue,
                        "text": line.text,
                        "start_ms": line.start_ms,
                        "end_ms": line.end_ms,
                        "scene_index": line.scene_index,
                    }
                    for line, cue in zip(cs.lines, cs.cues)
                ],
            }
            for cs in ctx.segments
        ],
        "action_lines": [
            {"scene_index": a.scene_index, "text": a.text} for a in ctx.action_lines
        ],
        "delivery_cues": [list(c) for c in ctx.delivery_cues],
        "untimed_blocks": [
            {
                "speaker": b.speaker,
                "cue": b.cue,
                "lines": list(b.lines),
                "scene_index": b.scene_index,
            }
            for b in ctx.untimed_blocks
        ],
        "scene_headings": [[s, h] for s, h in ctx.scene_headings],
    }
