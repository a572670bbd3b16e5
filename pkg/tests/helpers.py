"""Shared test oracles and fixture builders."""

from __future__ import annotations

from itertools import combinations

from scriptalign.subtitle import format_timestamp


def is_subsequence(candidate, sequence) -> bool:
    it = iter(sequence)
    return all(any(x == y for y in it) for x in candidate)


def lcs_brute_force(a, b) -> int:
    """LCS length by exhaustive enumeration over the shorter sequence.

    Independent of the DP implementation: walks subsequences longest
    first and returns the first one contained in the other sequence.
    """
    short, other = (a, b) if len(a) <= len(b) else (b, a)
    for length in range(len(short), 0, -1):
        for indices in combinations(range(len(short)), length):
            if is_subsequence([short[i] for i in indices], other):
                return length
    return 0


def make_srt(texts, start0=1000, dur=3000, gap=500) -> str:
    """Sequential single-line cues, one per text."""
    parts = []
    t = start0
    for i, text in enumerate(texts, 1):
        parts.append(f"{i}\n{format_timestamp(t)} --> {format_timestamp(t + dur)}\n{text}")
        t += dur + gap
    return "\n\n".join(parts) + "\n"


def make_screenplay_text(scenes) -> str:
    """Screenplay text from [(heading, [(speaker, [lines]) | ("ACTION", text)])].

    Speakers are laid out at column 30, dialogue at column 12, matching
    the default classifier thresholds.
    """
    out = []
    for heading, items in scenes:
        if heading:
            out.append(heading)
            out.append("")
        for item in items:
            if item[0] == "ACTION":
                out.append(item[1])
                out.append("")
            else:
                speaker, lines = item
                out.append(" " * 30 + speaker)
                out.extend(" " * 12 + line for line in lines)
                out.append("")
    return "\n".join(out) + "\n"


def synth_movie(rng, n_blocks=10, noise=0.0, n_speakers=4, scene_every=4):
    """Screenplay text plus an SRT whose cues mutate the dialogue tokens
    with probability ``noise`` (mutations become 'zzz', outside the vocabulary)."""
    speakers = [f"SPEAKER{i}" for i in range(1, n_speakers + 1)]
    vocab = [f"word{i}" for i in range(400)]
    scenes = []
    items = []
    cue_texts = []
    for b in range(n_blocks):
        if b % scene_every == 0 and items:
            scenes.append((f"INT. ROOM {len(scenes)} - DAY", items))
            items = []
        speaker = rng.choice(speakers)
        block_lines = []
        for _ in range(rng.randint(1, 2)):
            words = [rng.choice(vocab) for _ in range(rng.randint(5, 9))]
            block_lines.append(" ".join(words))
        items.append((speaker, block_lines))
        for line in block_lines:
            noisy = ["zzz" if rng.random() < noise else w for w in line.split()]
            cue_texts.append(" ".join(noisy))
    scenes.append((f"INT. ROOM {len(scenes)} - DAY", items))
    return make_screenplay_text(scenes), make_srt(cue_texts)
