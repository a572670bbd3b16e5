"""Token-level screenplay/subtitle alignment: windowed LCS anchors,
bidirectional same-speaker extension, and timestamp assignment."""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyInput, EmptyTrack, WindowExceeded
from .screenplay import DialogueBlock, Screenplay, extract_dialogue_blocks, scene_of_element
from .subtitle import SubtitleTrack

# punctuation stripped from tokens; apostrophes survive inside words
DEFAULT_STRIP_CHARS = string.punctuation.replace("'", "") + "“”‘…—–¡¿"
_QUOTE_TRANS = str.maketrans({"’": "'", "`": "'"})


@dataclass(frozen=True)
class AlignConfig:
    min_anchor_len: int = 4
    min_score: float = 0.3
    script_window: int = 2000
    subtitle_window: int = 4000
    strip_chars: str = DEFAULT_STRIP_CHARS


DEFAULT_ALIGN_CONFIG = AlignConfig()


@dataclass(frozen=True)
class Token:
    norm: str
    # (word,) from bare tokenize; (block, line, word) in script streams;
    # (cue, word) in subtitle streams
    origin: tuple[int, ...]


@dataclass(frozen=True)
class Anchor:
    script_range: tuple[int, int]  # half-open token ranges
    subtitle_range: tuple[int, int]
    matched: int


@dataclass(frozen=True)
class AlignedSegment:
    block_indices: tuple[int, int]  # half-open DialogueBlock range
    cue_indices: tuple[int, int]  # half-open SubtitleCue range
    start_ms: int
    end_ms: int
    score: float


@dataclass(frozen=True)
class AttributedLine:
    speaker: str
    text: str
    start_ms: int
    end_ms: int
    scene_index: int


@dataclass(frozen=True)
class AlignmentResult:
    segments: tuple[AlignedSegment, ...]
    unaligned_blocks: tuple[int, ...]
    dropped: tuple[AlignedSegment, ...]
    coverage: float
    movie_id: str | None = None


def tokenize(text: str, strip_chars: str = DEFAULT_STRIP_CHARS) -> list[Token]:
    """Whitespace-split, lowercase, strip punctuation except in-word apostrophes."""
    tokens = []
    for offset, word in enumerate(text.split()):
        norm = word.translate(_QUOTE_TRANS).lower()
        norm = "".join(c for c in norm if c not in strip_chars).strip("'")
        if norm:
            tokens.append(Token(norm, (offset,)))
    return tokens


def script_token_stream(
    blocks: Sequence[DialogueBlock], strip_chars: str = DEFAULT_STRIP_CHARS
) -> list[Token]:
    stream = []
    for bi, block in enumerate(blocks):
        for li, line in enumerate(block.lines):
            stream.extend(
                Token(t.norm, (bi, li, t.origin[0])) for t in tokenize(line, strip_chars)
            )
    return stream


def subtitle_token_stream(
    track: SubtitleTrack, strip_chars: str = DEFAULT_STRIP_CHARS
) -> list[Token]:
    stream = []
    for ci, cue in enumerate(track.cues):
        stream.extend(
            Token(t.norm, (ci, t.origin[0])) for t in tokenize(cue.clean_text, strip_chars)
        )
    return stream


def lcs(
    a: Sequence[str],
    b: Sequence[str],
    max_a: int | None = None,
    max_b: int | None = None,
) -> list[tuple[int, int]]:
    """Maximum-length common subsequence as strictly increasing (i, j) pairs.

    Among equal-length solutions the backtrace prefers matches at the
    smallest j, then the smallest i, keeping the sliding subtitle window
    causal.
    """
    if max_a is not None and len(a) > max_a:
        raise WindowExceeded(f"script side {len(a)} exceeds window {max_a}")
    if max_b is not None and len(b) > max_b:
        raise WindowExceeded(f"subtitle side {len(b)} exceeds window {max_b}")

    m, n = len(a), len(b)
    # table[i][j] = LCS length of a[:i] and b[:j]
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        ai = a[i - 1]
        row = table[i]
        prev = table[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                left = row[j - 1]
                up = prev[j]
                row[j] = left if left >= up else up

    pairs: list[tuple[int, int]] = []
    i, j = m, n
    while i > 0 and j > 0:
        current = table[i][j]
        if table[i][j - 1] == current:
            j -= 1
        elif table[i - 1][j] == current:
            i -= 1
        else:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
    pairs.reverse()
    return pairs


def find_anchors(
    script_tokens: Sequence[Token],
    subtitle_tokens: Sequence[Token],
    cfg: AlignConfig = DEFAULT_ALIGN_CONFIG,
    chunk_starts: Sequence[int] | None = None,
) -> list[Anchor]:
    """Locate runs of consecutively matched tokens between the two streams.

    LCS runs per script chunk (dialogue-block bounded when
    ``chunk_starts`` is given, window-bounded otherwise) against a
    subtitle window that starts where the previous confirmed run ended. A
    narrow window sized to the chunk is tried first so that stray matches
    of common words far ahead cannot outscore the local correspondence;
    the full configured window is the fallback when the narrow pass finds
    nothing. Runs shorter than ``cfg.min_anchor_len`` are discarded;
    surviving anchors are dominance filtered to a mutually monotone set.
    """
    a_norms = [t.norm for t in script_tokens]
    b_norms = [t.norm for t in subtitle_tokens]

    anchors: list[Anchor] = []
    sub_pos = 0
    for chunk_start, chunk_end in _script_chunks(len(a_norms), cfg.script_window, chunk_starts):
        chunk_len = chunk_end - chunk_start
        if chunk_len == 0 or sub_pos >= len(b_norms):
            continue
        narrow = min(2 * chunk_len + 64, cfg.subtitle_window)
        runs = _chunk_runs(a_norms, b_norms, chunk_start, chunk_end, sub_pos, narrow, cfg)
        if not runs and narrow < cfg.subtitle_window:
            runs = _chunk_runs(
                a_norms, b_norms, chunk_start, chunk_end, sub_pos, cfg.subtitle_window, cfg
            )
        for i0, j0, length in runs:
            anchors.append(Anchor((i0, i0 + length), (j0, j0 + length), length))
        if runs:
            last_i, last_j, last_len = runs[-1]
            sub_pos = max(sub_pos, last_j + last_len)
    return _dominance_filter(anchors)


def _chunk_runs(
    a_norms: list[str],
    b_norms: list[str],
    chunk_start: int,
    chunk_end: int,
    sub_pos: int,
    window: int,
    cfg: AlignConfig,
) -> list[tuple[int, int, int]]:
    """Anchor-quality runs (script start, subtitle start, length) for one chunk."""
    window_end = min(sub_pos + window, len(b_norms))
    if sub_pos >= window_end:
        return []
    pairs = lcs(a_norms[chunk_start:chunk_end], b_norms[sub_pos:window_end])
    runs = []
    for offset, length in _consecutive_runs(pairs):
        if length >= cfg.min_anchor_len:
            i, j = pairs[offset]
            runs.append((i + chunk_start, j + sub_pos, length))
    return runs


def _script_chunks(
    n: int, window: int, chunk_starts: Sequence[int] | None
) -> list[tuple[int, int]]:
    cuts = {0, n}
    for s in chunk_starts or ():
        if 0 < s < n:
            cuts.add(s)
    bounds = sorted(cuts)
    chunks = []
    for lo, hi in zip(bounds, bounds[1:]):
        while hi - lo > window:
            chunks.append((lo, lo + window))
            lo += window
        chunks.append((lo, hi))
    return chunks


def _consecutive_runs(pairs: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """(start offset, length) of maximal diagonal runs within matched pairs."""
    runs = []
    k = 0
    while k < len(pairs):
        start = k
        while (
            k + 1 < len(pairs)
            and pairs[k + 1][0] == pairs[k][0] + 1
            and pairs[k + 1][1] == pairs[k][1] + 1
        ):
            k += 1
        runs.append((start, k - start + 1))
        k += 1
    return runs


def _mutually_monotone(x: Anchor, y: Anchor) -> bool:
    if x.script_range[1] <= y.script_range[0] and x.subtitle_range[1] <= y.subtitle_range[0]:
        return True
    if y.script_range[1] <= x.script_range[0] and y.subtitle_range[1] <= x.subtitle_range[0]:
        return True
    return False


def _dominance_filter(anchors: list[Anchor]) -> list[Anchor]:
    """Drop anchors breaking monotonicity against higher-matched ones."""
    kept: list[Anchor] = []
    for anchor in sorted(
        anchors, key=lambda a: (-a.matched, a.script_range, a.subtitle_range)
    ):
        if all(_mutually_monotone(anchor, other) for other in kept):
            kept.append(anchor)
    kept.sort(key=lambda a: a.script_range)
    return kept


def extend_bidirectionally(
    anchor: Anchor,
    blocks: Sequence[DialogueBlock],
    sp: Screenplay,
    script_tokens: Sequence[Token] | None = None,
) -> tuple[int, int]:
    """Grow the anchor's block range one block at a time in both directions,
    stopping at a speaker change or a scene break. Returns a half-open
    DialogueBlock index range."""
    if script_tokens is None:
        script_tokens = script_token_stream(blocks)
    scene_of = scene_of_element(sp)

    def block_scene(b: int) -> int:
        return scene_of[blocks[b].element_range[0]]

    first = script_tokens[anchor.script_range[0]].origin[0]
    last = script_tokens[anchor.script_range[1] - 1].origin[0]
    seed_scene = block_scene(first)
    # defensive: clip a seed that crosses a scene break to its first scene
    while last > first and block_scene(last) != seed_scene:
        last -= 1

    lo = first
    while (
        lo > 0
        and blocks[lo - 1].speaker == blocks[first].speaker
        and block_scene(lo - 1) == seed_scene
    ):
        lo -= 1
    hi = last
    while (
        hi + 1 < len(blocks)
        and blocks[hi + 1].speaker == blocks[last].speaker
        and block_scene(hi + 1) == seed_scene
    ):
        hi += 1
    return (lo, hi + 1)


def _split_at_speaker_runs(
    anchors: Sequence[Anchor],
    blocks: Sequence[DialogueBlock],
    script_tokens: Sequence[Token],
) -> list[Anchor]:
    """Split anchors wherever they cross a speaker or scene change.

    A matched run is evidence for every speaker run it touches, but each
    resulting segment must stay within one speaker run so that extension
    stops at speaker changes; sub-anchors keep their diagonal subtitle
    sub-ranges and may be shorter than the anchor threshold.
    """
    run_of_block = []
    run = 0
    for i, block in enumerate(blocks):
        if i and (
            block.speaker != blocks[i - 1].speaker
            or block.scene_index != blocks[i - 1].scene_index
        ):
            run += 1
        run_of_block.append(run)

    def token_run(t: int) -> int:
        return run_of_block[script_tokens[t].origin[0]]

    split: list[Anchor] = []
    for anchor in anchors:
        s0, s1 = anchor.script_range
        j0 = anchor.subtitle_range[0]
        start = s0
        for k in range(s0 + 1, s1 + 1):
            if k == s1 or token_run(k) != token_run(start):
                offset = start - s0
                split.append(
                    Anchor((start, k), (j0 + offset, j0 + offset + (k - start)), k - start)
                )
                start = k
    return split


def _block_token_starts(script_tokens: Sequence[Token]) -> list[int]:
    """Token indices where a new dialogue block begins."""
    return [
        idx
        for idx in range(1, len(script_tokens))
        if script_tokens[idx].origin[0] != script_tokens[idx - 1].origin[0]
    ]


def align(
    sp: Screenplay, track: SubtitleTrack, cfg: AlignConfig = DEFAULT_ALIGN_CONFIG
) -> AlignmentResult:
    """Full pipeline: tokenize, anchor, extend, assign timestamps, score.

    Segments scoring below ``cfg.min_score`` are moved to ``dropped``;
    blocks covered by no retained segment are listed unaligned. Coverage
    is the token share of blocks covered by retained segments.
    """
    if not sp.elements:
        raise EmptyInput("screenplay has no elements")
    if not track.cues:
        raise EmptyTrack("subtitle track has no cues")

    blocks = extract_dialogue_blocks(sp)
    script_tokens = script_token_stream(blocks, cfg.strip_chars)
    subtitle_tokens = subtitle_token_stream(track, cfg.strip_chars)
    anchors = find_anchors(
        script_tokens,
        subtitle_tokens,
        cfg,
        chunk_starts=_block_token_starts(script_tokens),
    )

    candidates = []
    for anchor in _split_at_speaker_runs(anchors, blocks, script_tokens):
        block_range = extend_bidirectionally(anchor, blocks, sp, script_tokens)
        cue_range = (
            subtitle_tokens[anchor.subtitle_range[0]].origin[0],
            subtitle_tokens[anchor.subtitle_range[1] - 1].origin[0] + 1,
        )
        candidates.append([block_range, cue_range, anchor.matched])

    candidates.sort(key=lambda c: (c[0], c[1]))
    merged: list[list] = []
    for block_range, cue_range, matched in candidates:
        if merged and (
            block_range[0] < merged[-1][0][1] or cue_range[0] < merged[-1][1][1]
        ):
            last = merged[-1]
            last[0] = (min(last[0][0], block_range[0]), max(last[0][1], block_range[1]))
            last[1] = (min(last[1][0], cue_range[0]), max(last[1][1], cue_range[1]))
            last[2] += matched
        else:
            merged.append([block_range, cue_range, matched])

    tokens_per_block = Counter(t.origin[0] for t in script_tokens)
    tokens_per_cue = Counter(t.origin[0] for t in subtitle_tokens)

    segments: list[AlignedSegment] = []
    dropped: list[AlignedSegment] = []
    for block_range, cue_range, matched in merged:
        script_n = sum(tokens_per_block[b] for b in range(*block_range))
        subtitle_n = sum(tokens_per_cue[c] for c in range(*cue_range))
        score = matched / max(script_n, subtitle_n)
        segment = AlignedSegment(
            tuple(block_range),
            tuple(cue_range),
            track.cues[cue_range[0]].start_ms,
            track.cues[cue_range[1] - 1].end_ms,
            score,
        )
        (segments if score >= cfg.min_score else dropped).append(segment)

    covered: set[int] = set()
    for segment in segments:
        covered.update(range(*segment.block_indices))
    unaligned = tuple(b for b in range(len(blocks)) if b not in covered)
    total_tokens = len(script_tokens)
    coverage = (
        sum(tokens_per_block[b] for b in covered) / total_tokens if total_tokens else 0.0
    )
    return AlignmentResult(tuple(segments), unaligned, tuple(dropped), coverage)


def segment_lines(
    segment: AlignedSegment, blocks: Sequence[DialogueBlock]
) -> list[AttributedLine]:
    """Per-dialogue-line attribution for one segment (segment-level timestamps)."""
    lines = []
    for bi in range(*segment.block_indices):
        block = blocks[bi]
        lines.extend(
            AttributedLine(block.speaker, text, segment.start_ms, segment.end_ms, block.scene_index)
            for text in block.lines
        )
    return lines


def attribute_dialogue(
    result: AlignmentResult,
    blocks: Sequence[DialogueBlock],
    track: SubtitleTrack,
) -> list[AttributedLine]:
    """One AttributedLine per dialogue line in each aligned segment,
    ordered by start time then block order."""
    for segment in result.segments:
        if segment.cue_indices[1] > len(track.cues):
            raise ValueError(
                f"segment cue range {segment.cue_indices} exceeds track of {len(track.cues)} cues"
            )
    out: list[AttributedLine] = []
    for segment in sorted(result.segments, key=lambda s: (s.start_ms, s.block_indices)):
        out.extend(segment_lines(segment, blocks))
    return out


def _segment_to_dict(segment: AlignedSegment) -> dict:
    return {
        "block_range": list(segment.block_indices),
        "cue_range": list(segment.cue_indices),
        "start_ms": segment.start_ms,
        "end_ms": segment.end_ms,
        "score": segment.score,
    }


def _segment_from_dict(data: dict) -> AlignedSegment:
    return AlignedSegment(
        (data["block_range"][0], data["block_range"][1]),
        (data["cue_range"][0], data["cue_range"][1]),
        data["start_ms"],
        data["end_ms"],
        data["score"],
    )


def result_to_dict(result: AlignmentResult) -> dict:
    return {
        "movie_id": result.movie_id,
        "segments": [_segment_to_dict(s) for s in result.segments],
        "unaligned_blocks": list(result.unaligned_blocks),
        "dropped_segments": [_segment_to_dict(s) for s in result.dropped],
        "coverage": result.coverage,
    }


def result_from_dict(data: dict) -> AlignmentResult:
    return AlignmentResult(
        segments=tuple(_segment_from_dict(s) for s in data["segments"]),
        unaligned_blocks=tuple(data["unaligned_blocks"]),
        dropped=tuple(_segment_from_dict(s) for s in data["dropped_segments"]),
        coverage=data["coverage"],
        movie_id=data.get("movie_id"),
    )


def line_to_dict(line: AttributedLine) -> dict:
    return {
        "speaker": line.speaker,
        "text": line.text,
        "start_ms": line.start_ms,
        "end_ms": line.end_ms,
        "scene_index": line.scene_index,
    }
