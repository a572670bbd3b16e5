import random

import pytest
from hypothesis import given, settings, strategies as st

from scriptalign.align import (
    AlignConfig,
    Anchor,
    _dominance_filter,
    align,
    attribute_dialogue,
    extend_bidirectionally,
    find_anchors,
    lcs,
    script_token_stream,
    subtitle_token_stream,
    tokenize,
)
from scriptalign.errors import EmptyTrack, WindowExceeded
from scriptalign.screenplay import extract_dialogue_blocks, parse_screenplay
from scriptalign.subtitle import parse_srt

from conftest import FIXTURES
from helpers import lcs_brute_force, make_screenplay_text, make_srt


# --- tokenize ---------------------------------------------------------------

def test_tokenize_examples():
    assert [t.norm for t in tokenize("Don't go!")] == ["don't", "go"]
    assert tokenize("") == []
    assert [t.norm for t in tokenize("WELL... well, WELL")] == ["well", "well", "well"]


def test_tokenize_origin_offsets():
    tokens = tokenize("... hello ...  world")
    assert [(t.norm, t.origin) for t in tokens] == [("hello", (1,)), ("world", (3,))]


def test_tokenize_curly_apostrophe_folds():
    assert [t.norm for t in tokenize("don’t")] == ["don't"]


def test_tokenize_edge_apostrophes_stripped():
    assert [t.norm for t in tokenize("'tis 'quoted'")] == ["tis", "quoted"]


@given(st.text(max_size=80))
def test_tokenize_norms_are_clean(text):
    cfg = AlignConfig()
    for token in tokenize(text):
        assert token.norm
        assert token.norm == token.norm.lower()
        assert not set(token.norm) & set(cfg.strip_chars)


# --- lcs --------------------------------------------------------------------

def test_lcs_identity():
    assert lcs(["x", "y", "z"], ["x", "y", "z"]) == [(0, 0), (1, 1), (2, 2)]


def test_lcs_disjoint():
    assert lcs(["p", "q"], ["r", "s"]) == []


def test_lcs_tie_break_prefers_smaller_j_then_i():
    assert lcs(["x"], ["x", "x"]) == [(0, 0)]
    assert lcs(["x", "x"], ["x"]) == [(0, 0)]
    assert lcs(["x", "y"], ["y", "x"]) == [(1, 0)]
    assert lcs(["w", "v"], ["w", "v", "w", "v"]) == [(0, 0), (1, 1)]


def test_lcs_window_exceeded():
    with pytest.raises(WindowExceeded):
        lcs(["a"] * 5, ["a"], max_a=4)
    with pytest.raises(WindowExceeded):
        lcs(["a"], ["a"] * 5, max_b=4)


def test_lcs_against_brute_force_seeded():
    rng = random.Random(42)
    alphabet = "abcde"
    for _ in range(200):
        a = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        b = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        pairs = lcs(a, b)
        assert len(pairs) == lcs_brute_force(a, b)
        _check_pairs_valid(a, b, pairs)


def _check_pairs_valid(a, b, pairs):
    for (i1, j1), (i2, j2) in zip(pairs, pairs[1:]):
        assert i1 < i2 and j1 < j2
    for i, j in pairs:
        assert a[i] == b[j]


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.sampled_from("abc"), max_size=8),
    st.lists(st.sampled_from("abc"), max_size=8),
)
def test_lcs_matches_oracle_property(a, b):
    pairs = lcs(a, b)
    assert len(pairs) == lcs_brute_force(a, b)
    _check_pairs_valid(a, b, pairs)


# --- find_anchors -----------------------------------------------------------

def _single_block_streams(words, replaced=()):
    """Token streams from one synthetic block and one cue."""
    script = make_screenplay_text([(None, [("MARY", [" ".join(words)])])])
    sp = parse_screenplay(script)
    blocks = extract_dialogue_blocks(sp)
    mutated = ["xxx" if i in replaced else w for i, w in enumerate(words)]
    track = parse_srt(make_srt([" ".join(mutated)]))
    return script_token_stream(blocks), subtitle_token_stream(track)


def test_identity_stream_single_anchor():
    words = [f"tok{i}" for i in range(6)]
    script_tokens, subtitle_tokens = _single_block_streams(words)
    anchors = find_anchors(script_tokens, subtitle_tokens)
    assert len(anchors) == 1
    assert anchors[0].matched == 6
    assert anchors[0].script_range == (0, 6)
    assert anchors[0].subtitle_range == (0, 6)


def test_every_fifth_token_replaced():
    # 30 distinct tokens, every 5th replaced: six runs of exactly 4 remain
    words = [f"tok{i}" for i in range(30)]
    replaced = {4, 9, 14, 19, 24, 29}
    script_tokens, subtitle_tokens = _single_block_streams(words, replaced)
    anchors = find_anchors(script_tokens, subtitle_tokens)
    assert len(anchors) == 6
    assert sum(a.matched for a in anchors) == 24
    assert all(a.matched == 4 for a in anchors)


def test_unrelated_streams_no_anchors():
    script_tokens, _ = _single_block_streams([f"left{i}" for i in range(10)])
    _, subtitle_tokens = _single_block_streams([f"right{i}" for i in range(10)])
    assert find_anchors(script_tokens, subtitle_tokens) == []


def test_short_runs_below_threshold_dropped():
    words = [f"tok{i}" for i in range(7)]
    script_tokens, subtitle_tokens = _single_block_streams(words, replaced={3})
    # runs of 3 and 3, both under the default threshold of 4
    assert find_anchors(script_tokens, subtitle_tokens) == []
    cfg = AlignConfig(min_anchor_len=3)
    assert len(find_anchors(script_tokens, subtitle_tokens, cfg)) == 2


def test_dominance_filter_drops_non_monotone():
    strong = Anchor((10, 20), (10, 20), 10)
    crossing = Anchor((0, 5), (30, 35), 5)  # earlier script, later subtitles
    clean = Anchor((25, 30), (25, 30), 5)
    kept = _dominance_filter([crossing, strong, clean])
    assert kept == [strong, clean]


# --- extend_bidirectionally ---------------------------------------------------

def _fixture_blocks(speakers_per_scene):
    scenes = []
    word = 0
    for scene_no, speakers in enumerate(speakers_per_scene):
        items = []
        for speaker in speakers:
            items.append((speaker, [f"w{word} w{word+1} w{word+2} w{word+3}"]))
            word += 4
        scenes.append((f"INT. ROOM {scene_no} - DAY", items))
    sp = parse_screenplay(make_screenplay_text(scenes))
    return sp, extract_dialogue_blocks(sp)


def test_extension_covers_same_speaker_run():
    # blocks [A, A, A, B]; anchor inside the second A block
    sp, blocks = _fixture_blocks([["AMY", "AMY", "AMY", "BOB"]])
    tokens = script_token_stream(blocks)
    anchor = Anchor((4, 8), (4, 8), 4)  # tokens of block 1
    assert extend_bidirectionally(anchor, blocks, sp, tokens) == (0, 3)


def test_extension_stops_at_different_speakers():
    sp, blocks = _fixture_blocks([["AMY", "BOB", "AMY"]])
    tokens = script_token_stream(blocks)
    anchor = Anchor((4, 8), (4, 8), 4)  # block 1 (BOB)
    assert extend_bidirectionally(anchor, blocks, sp, tokens) == (1, 2)


def test_extension_stops_at_scene_break():
    # same speaker both sides of the scene boundary
    sp, blocks = _fixture_blocks([["AMY", "AMY"], ["AMY", "AMY"]])
    tokens = script_token_stream(blocks)
    anchor_last_of_scene_one = Anchor((4, 8), (4, 8), 4)  # block 1
    assert extend_bidirectionally(anchor_last_of_scene_one, blocks, sp, tokens) == (0, 2)
    anchor_first_of_scene_two = Anchor((8, 12), (8, 12), 4)  # block 2
    assert extend_bidirectionally(anchor_first_of_scene_two, blocks, sp, tokens) == (2, 4)


# --- align ------------------------------------------------------------------

def _verbatim_movie(n_blocks=10, words_per_block=5):
    """Distinct speakers, one line per block, cue text equals block text."""
    word = 0
    items = []
    cues = []
    for b in range(n_blocks):
        text = " ".join(f"w{word + k}" for k in range(words_per_block))
        word += words_per_block
        items.append((f"SPEAKER{b}", [text]))
        cues.append(text)
    sp = parse_screenplay(make_screenplay_text([("INT. SOMEWHERE - DAY", items)]))
    return sp, cues


def test_align_verbatim_corresponds():
    sp, cues = _verbatim_movie()
    track = parse_srt(make_srt(cues))
    result = align(sp, track)
    assert len(result.segments) == 10
    assert result.coverage == 1.0
    assert result.unaligned_blocks == ()
    assert all(s.score == 1.0 for s in result.segments)
    for seg, cue in zip(result.segments, track.cues):
        assert (seg.start_ms, seg.end_ms) == (cue.start_ms, cue.end_ms)


def test_align_two_blocks_unmatched():
    sp, cues = _verbatim_movie()
    missing = {3, 7}
    track = parse_srt(make_srt([c for i, c in enumerate(cues) if i not in missing]))
    result = align(sp, track)
    assert result.unaligned_blocks == (3, 7)
    # 8 aligned blocks x 5 tokens over 50 total
    assert result.coverage == pytest.approx(0.8)
    assert all(s.score == 1.0 for s in result.segments)


def test_align_empty_track_raises():
    sp, _ = _verbatim_movie()
    with pytest.raises(EmptyTrack):
        parse_srt("")


def test_align_same_speaker_blocks_merge():
    word = 0
    items = []
    cues = []
    for _ in range(3):
        text = " ".join(f"w{word + k}" for k in range(5))
        word += 5
        items.append(("MARY", [text]))
        cues.append(text)
    sp = parse_screenplay(make_screenplay_text([("INT. HALL - DAY", items)]))
    result = align(sp, parse_srt(make_srt(cues)))
    assert len(result.segments) == 1
    assert result.segments[0].block_indices == (0, 3)
    assert result.segments[0].cue_indices == (0, 3)
    assert result.segments[0].score == 1.0
    assert result.coverage == 1.0


def test_align_monotone_segments_property():
    rng = random.Random(1234)
    for case in range(25):
        noise = rng.uniform(0.0, 0.3)
        script, srt = _random_movie(rng, noise)
        result = align(parse_screenplay(script), parse_srt(srt))
        _check_result_invariants(result, parse_srt(srt))


def _random_movie(rng, noise):
    from helpers import synth_movie

    return synth_movie(rng, n_blocks=rng.randint(4, 12), noise=noise)


def _check_result_invariants(result, track):
    first_start = track.cues[0].start_ms
    last_end = track.cues[-1].end_ms
    for seg in result.segments:
        assert seg.start_ms <= seg.end_ms
        assert first_start <= seg.start_ms and seg.end_ms <= last_end
        assert 0.0 < seg.score <= 1.0
    for a, b in zip(result.segments, result.segments[1:]):
        assert a.block_indices[1] <= b.block_indices[0]
        assert a.cue_indices[1] <= b.cue_indices[0]
    assert 0.0 <= result.coverage <= 1.0


# --- attribute_dialogue -------------------------------------------------------

def test_attribute_single_line_example():
    sp = parse_screenplay(
        make_screenplay_text([("INT. BEDROOM - NIGHT", [("MARY", ["I can't stay here tonight."])])])
    )
    srt = "1\n00:12:01,000 --> 00:12:03,500\nI can't stay here tonight.\n"
    track = parse_srt(srt)
    result = align(sp, track)
    blocks = extract_dialogue_blocks(sp)
    lines = attribute_dialogue(result, blocks, track)
    assert len(lines) == 1
    line = lines[0]
    assert (line.speaker, line.start_ms, line.end_ms) == ("MARY", 721000, 723500)
    assert line.text == "I can't stay here tonight."


def test_attribute_empty_result():
    sp, _ = _verbatim_movie(n_blocks=2)
    track = parse_srt(make_srt(["completely unrelated noise tokens here"]))
    result = align(sp, track)
    assert result.segments == ()
    assert attribute_dialogue(result, extract_dialogue_blocks(sp), track) == []


def test_attribute_two_speaker_fixture_exact():
    sp = parse_screenplay((FIXTURES / "two_speaker.txt").read_text())
    track = parse_srt((FIXTURES / "two_speaker.srt").read_text())
    result = align(sp, track)
    blocks = extract_dialogue_blocks(sp)
    lines = attribute_dialogue(result, blocks, track)

    # ground truth: alternating speakers, blocks 3 and 7 span two cues
    def cue_span(first, last):
        return (10000 + 5000 * first, 14000 + 5000 * last)

    expected = [
        ("MARY", cue_span(0, 0)),
        ("JOE", cue_span(1, 1)),
        ("MARY", cue_span(2, 2)),
        ("JOE", cue_span(3, 4)),
        ("JOE", cue_span(3, 4)),
        ("MARY", cue_span(5, 5)),
        ("JOE", cue_span(6, 6)),
        ("MARY", cue_span(7, 7)),
        ("JOE", cue_span(8, 9)),
        ("JOE", cue_span(8, 9)),
        ("MARY", cue_span(10, 10)),
        ("JOE", cue_span(11, 11)),
    ]
    assert [(l.speaker, (l.start_ms, l.end_ms)) for l in lines] == expected
    # every line's speaker equals its block's speaker
    by_text = {line for block in blocks for line in block.lines}
    assert all(line.text in by_text for line in lines)


def test_attribution_consistency_on_fixture():
    sp = parse_screenplay((FIXTURES / "two_speaker.txt").read_text())
    track = parse_srt((FIXTURES / "two_speaker.srt").read_text())
    result = align(sp, track)
    blocks = extract_dialogue_blocks(sp)
    speaker_of_line = {}
    for block in blocks:
        for text in block.lines:
            speaker_of_line[text] = block.speaker
    for line in attribute_dialogue(result, blocks, track):
        assert line.speaker == speaker_of_line[line.text]


def test_segments_never_cross_scene_boundary():
    sp, blocks = _fixture_blocks([["AMY", "AMY"], ["AMY", "AMY"]])
    cues = [line for b in blocks for line in b.lines]
    result = align(sp, parse_srt(make_srt(cues)))
    assert len(result.segments) == 2
    assert result.segments[0].block_indices == (0, 2)
    assert result.segments[1].block_indices == (2, 4)
    assert result.coverage == 1.0
