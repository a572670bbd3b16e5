"""Screenplay/subtitle alignment toolkit.

Parses screenplays and SRT tracks, aligns dialogue through windowed LCS
matching to attribute speakers and timestamps, extracts per-story script
context, parses grounded-story tags, and aggregates pairwise/QA
evaluation results.
"""

from .align import (
    AlignConfig,
    AlignedSegment,
    AlignmentResult,
    Anchor,
    AttributedLine,
    Token,
    align,
    attribute_dialogue,
    extend_bidirectionally,
    find_anchors,
    lcs,
    tokenize,
)
from .grounding import CorpusStats, GroundedStory, GroundingTag, compute_stats, parse_grounded_story
from .screenplay import (
    DialogueBlock,
    ElementKind,
    Screenplay,
    ScreenplayElement,
    classify_line,
    extract_dialogue_blocks,
    parse_screenplay,
)
from .segment import FrameRange, StoryScriptContext, extract_context, render_context
from .subtitle import SubtitleCue, SubtitleTrack, parse_srt, serialize_srt
from .evaluation import (
    PairwiseVerdict,
    QAItem,
    QAResult,
    WinRateTable,
    aggregate_pairwise,
    build_pairwise_prompt,
    call_judge,
    parse_verdict,
    score_qa,
)

__version__ = "0.1.0"

__all__ = [
    "AlignConfig",
    "AlignedSegment",
    "AlignmentResult",
    "Anchor",
    "AttributedLine",
    "CorpusStats",
    "DialogueBlock",
    "ElementKind",
    "FrameRange",
    "GroundedStory",
    "GroundingTag",
    "PairwiseVerdict",
    "QAItem",
    "QAResult",
    "Screenplay",
    "ScreenplayElement",
    "StoryScriptContext",
    "SubtitleCue",
    "SubtitleTrack",
    "Token",
    "WinRateTable",
    "align",
    "aggregate_pairwise",
    "attribute_dialogue",
    "build_pairwise_prompt",
    "call_judge",
    "classify_line",
    "compute_stats",
    "extend_bidirectionally",
    "extract_context",
    "extract_dialogue_blocks",
    "find_anchors",
    "lcs",
    "parse_grounded_story",
    "parse_screenplay",
    "parse_srt",
    "parse_verdict",
    "render_context",
    "score_qa",
    "serialize_srt",
    "tokenize",
]
