"""Grounded-story tag extraction and corpus statistics."""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyCorpus

TAG_KINDS = ("gdo", "gda", "gdl", "gdi")

_TAG_TOKEN_RE = re.compile(r"<(/?)([A-Za-z][\w-]*)((?:\s+[^<>]*?)?)\s*>")


@dataclass(frozen=True)
class GroundingTag:
    kind: str  # one of TAG_KINDS
    entity_id: str
    inner_text: str
    char_span: tuple[int, int]  # half-open span in plain_text


@dataclass(frozen=True)
class GroundedStory:
    story_id: str
    plain_text: str
    tags: tuple[GroundingTag, ...]
    word_count: int
    distinct_characters: int
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusStats:
    n_stories: int
    mean_words: float
    std_words: float  # population standard deviation
    mean_refs_total: float
    mean_char_mentions: float
    mean_object_refs: float
    mean_setting_refs: float
    mean_action_refs: float
    mean_image_refs: float  # gdi, tracked separately from the four categories
    mean_distinct_chars: float


def parse_grounded_story(text: str, story_id: str = "") -> GroundedStory:
    """Extract gdo/gda/gdl/gdi tags and the tag-stripped plain text.

    Malformed tags (unclosed, stray close, unknown kind, missing entity
    id) stay verbatim in the plain text and are counted as warnings.
    Nested tags are supported; an outer tag's inner text includes the
    plain text of its children.
    """
    tokens = list(_TAG_TOKEN_RE.finditer(text))
    matched = _match_tag_pairs(tokens)

    warnings = []
    plain_parts: list[str] = []
    plain_len = 0
    stack: list[tuple[str, str, int]] = []  # kind, entity, plain start
    spans: list[tuple[str, str, int, int]] = []
    pos = 0
    for idx, token in enumerate(tokens):
        plain_parts.append(text[pos : token.start()])
        plain_len += token.start() - pos
        pos = token.end()
        role = matched.get(idx)
        if role is None:
            warnings.append(f"malformed tag {token.group(0)!r} left verbatim")
            plain_parts.append(token.group(0))
            plain_len += len(token.group(0))
        elif role == "open":
            entity = token.group(3).split()[0]
            stack.append((token.group(2).lower(), entity, plain_len))
        else:
            kind, entity, start = stack.pop()
            spans.append((kind, entity, start, plain_len))
    plain_parts.append(text[pos:])
    plain_text = "".join(plain_parts)

    tags = tuple(
        GroundingTag(kind, entity, plain_text[start:end], (start, end))
        for kind, entity, start, end in sorted(spans, key=lambda s: (s[2], -s[3]))
    )
    characters = {t.entity_id for t in tags if t.kind == "gdo" and t.entity_id.startswith("char")}
    return GroundedStory(
        story_id=story_id,
        plain_text=plain_text,
        tags=tags,
        word_count=len(plain_text.split()),
        distinct_characters=len(characters),
        warnings=tuple(warnings),
    )


def _match_tag_pairs(tokens: list[re.Match]) -> dict[int, str]:
    """Decide which tag tokens form well-nested pairs.

    Returns {token index: "open" | "close"} for matched tokens only;
    everything else is treated as malformed text.
    """
    matched: dict[int, str] = {}
    stack: list[tuple[str, int]] = []  # kind, token index
    for idx, token in enumerate(tokens):
        closing = bool(token.group(1))
        kind = token.group(2).lower()
        entity = token.group(3).strip()
        if kind not in TAG_KINDS:
            continue
        if not closing:
            if entity:
                stack.append((kind, idx))
            continue
        if any(k == kind for k, _ in stack):
            # unwind anything the stray nesting left open
            while stack[-1][0] != kind:
                stack.pop()
            matched[stack.pop()[1]] = "open"
            matched[idx] = "close"
    return matched


def story_counts(story: GroundedStory) -> dict[str, int]:
    """Per-story reference counts in the four report categories plus gdi."""
    char_mentions = sum(
        1 for t in story.tags if t.kind == "gdo" and t.entity_id.startswith("char")
    )
    gdo_total = sum(1 for t in story.tags if t.kind == "gdo")
    counts = {
        "char_mentions": char_mentions,
        "object_refs": gdo_total - char_mentions,
        "setting_refs": sum(1 for t in story.tags if t.kind == "gdl"),
        "action_refs": sum(1 for t in story.tags if t.kind == "gda"),
        "image_refs": sum(1 for t in story.tags if t.kind == "gdi"),
    }
    counts["refs_total"] = (
        counts["char_mentions"]
        + counts["object_refs"]
        + counts["setting_refs"]
        + counts["action_refs"]
    )
    return counts


def compute_stats(stories: Sequence[GroundedStory]) -> CorpusStats:
    """Arithmetic means over stories; word-count spread as population std."""
    if not stories:
        raise EmptyCorpus("no stories to aggregate")
    counts = [story_counts(s) for s in stories]
    words = [s.word_count for s in stories]

    def mean_of(key: str) -> float:
        return statistics.fmean(c[key] for c in counts)

    return CorpusStats(
        n_stories=len(stories),
        mean_words=statistics.fmean(words),
        std_words=statistics.pstdev(words),
        mean_refs_total=mean_of("refs_total"),
        mean_char_mentions=mean_of("char_mentions"),
        mean_object_refs=mean_of("object_refs"),
        mean_setting_refs=mean_of("setting_refs"),
        mean_action_refs=mean_of("action_refs"),
        mean_image_refs=mean_of("image_refs"),
        mean_distinct_chars=statistics.fmean(s.distinct_characters for s in stories),
    )


def stats_to_dict(stats: CorpusStats) -> dict:
    return {
        "n_stories": stats.n_stories,
        "mean_words": stats.mean_words,
        "std_words": stats.std_words,
        "mean_refs_total": stats.mean_refs_total,
        "mean_char_mentions": stats.mean_char_mentions,
        "mean_object_refs": stats.mean_object_refs,
        "mean_setting_refs": stats.mean_setting_refs,
        "mean_action_refs": stats.mean_action_refs,
        "mean_image_refs": stats.mean_image_refs,
        "mean_distinct_chars": stats.mean_distinct_chars,
    }
