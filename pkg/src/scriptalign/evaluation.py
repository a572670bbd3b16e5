"""Pairwise-preference aggregation, QA scoring, judge prompts, and a
generic chat-completion judge client."""

from __future__ import annotations

import json
import os
import re
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .errors import (
    AuthError,
    EmptyGroup,
    InputError,
    MalformedResponse,
    MissingAnswer,
    RateLimited,
    RunMismatch,
    TransportError,
    UnparseableVerdict,
)

REFERENCE_TYPES = ("subtitles", "description", "synopsis")
WINNERS = ("A", "B", "tie")
QA_CATEGORIES = ("emotional", "action", "relationship")

_RETRY_ATTEMPTS = 3
_BACKOFF_BASE_S = 0.5


@dataclass(frozen=True)
class PairwiseVerdict:
    sample_id: str
    reference_type: str
    run_id: int
    winner: str

    def __post_init__(self):
        if self.reference_type not in REFERENCE_TYPES:
            raise InputError(f"unknown reference_type {self.reference_type!r}")
        if self.run_id < 1:
            raise InputError(f"run_id must be >= 1, got {self.run_id}")
        if self.winner not in WINNERS:
            raise InputError(f"winner must be one of {WINNERS}, got {self.winner!r}")


@dataclass(frozen=True)
class RateStats:
    win_a_mean: float
    win_a_std: float
    win_b_mean: float
    win_b_std: float
    tie_mean: float
    tie_std: float


@dataclass(frozen=True)
class WinRateTable:
    rows: dict[str, RateStats]  # keyed by reference_type
    runs_per_type: dict[str, int]
    samples_per_type: dict[str, int]


@dataclass(frozen=True)
class QAItem:
    story_id: str
    category: str
    question: str
    options: tuple[str, str, str]
    correct_index: int

    def __post_init__(self):
        if self.category not in QA_CATEGORIES:
            raise InputError(f"unknown QA category {self.category!r}")
        if len(self.options) != 3:
            raise InputError(f"QA item needs exactly 3 options, got {len(self.options)}")
        if not 0 <= self.correct_index <= 2:
            raise InputError(f"correct_index must be 0..2, got {self.correct_index}")


@dataclass(frozen=True)
class QAResult:
    overall_accuracy: float
    per_category: dict[str, float]
    n_stories: int
    n_questions: int


def aggregate_pairwise(verdicts: Sequence[PairwiseVerdict]) -> WinRateTable:
    """Win/tie rates per reference type, mean and population std across runs.

    Every run of a reference type must cover the same sample set; rates
    are percentages and kept at full precision (rounding happens only at
    the presentation layer).
    """
    if not verdicts:
        raise EmptyGroup("no verdicts to aggregate")

    by_ref: dict[str, dict[int, dict[str, str]]] = {}
    for v in verdicts:
        run = by_ref.setdefault(v.reference_type, {}).setdefault(v.run_id, {})
        if v.sample_id in run:
            raise RunMismatch(
                f"duplicate verdict for ({v.sample_id!r}, {v.reference_type}, run {v.run_id})"
            )
        run[v.sample_id] = v.winner

    rows: dict[str, RateStats] = {}
    runs_per_type: dict[str, int] = {}
    samples_per_type: dict[str, int] = {}
    for ref in sorted(by_ref):
        runs = by_ref[ref]
        run_ids = sorted(runs)
        sample_set = set(runs[run_ids[0]])
        for run_id in run_ids[1:]:
            if set(runs[run_id]) != sample_set:
                raise RunMismatch(
                    f"{ref}: run {run_id} covers a different sample set than run {run_ids[0]}"
                )
        rates = {winner: [] for winner in WINNERS}
        for run_id in run_ids:
            winners = list(runs[run_id].values())
            for winner in WINNERS:
                rates[winner].append(100.0 * winners.count(winner) / len(winners))
        rows[ref] = RateStats(
            statistics.fmean(rates["A"]),
            statistics.pstdev(rates["A"]),
            statistics.fmean(rates["B"]),
            statistics.pstdev(rates["B"]),
            statistics.fmean(rates["tie"]),
            statistics.pstdev(rates["tie"]),
        )
        runs_per_type[ref] = len(run_ids)
        samples_per_type[ref] = len(sample_set)
    return WinRateTable(rows, runs_per_type, samples_per_type)


def score_qa(
    items: Sequence[QAItem], answers: Mapping[tuple[str, str], int]
) -> QAResult:
    """Overall and per-category accuracy against the item keys' answers."""
    by_key: dict[tuple[str, str], QAItem] = {}
    for item in items:
        key = (item.story_id, item.category)
        if key in by_key:
            raise InputError(f"duplicate QA item for {key}")
        by_key[key] = item
    if not by_key:
        raise InputError("no QA items")
    stories = {story for story, _ in by_key}
    for story in sorted(stories):
        absent = [c for c in QA_CATEGORIES if (story, c) not in by_key]
        if absent:
            raise InputError(f"story {story!r} lacks categories: {', '.join(absent)}")

    missing = sorted(k for k in by_key if k not in answers)
    if missing:
        raise MissingAnswer(missing)

    correct = {c: 0 for c in QA_CATEGORIES}
    for key, item in by_key.items():
        if answers[key] == item.correct_index:
            correct[item.category] += 1
    n_stories = len(stories)
    per_category = {c: 100.0 * correct[c] / n_stories for c in QA_CATEGORIES}
    overall = 100.0 * sum(correct.values()) / len(by_key)
    return QAResult(overall, per_category, n_stories, len(by_key))


_PROMPT_TEMPLATE = """You are comparing two machine-written stories against a reference.

REFERENCE ({reference_type}):
{reference}

STORY A:
{story_a}

STORY B:
{story_b}

Which story matches the reference better? Reply with exactly one token:
A, B, or TIE.
"""


def build_pairwise_prompt(
    story_a: str, story_b: str, reference: str, reference_type: str
) -> str:
    """Deterministic judge prompt; callers decide which story sits in
    position A (swap between runs to counter position bias)."""
    if reference_type not in REFERENCE_TYPES:
        raise InputError(f"unknown reference_type {reference_type!r}")
    if not (story_a and story_b and reference):
        raise InputError("stories and reference must be non-empty")
    return _PROMPT_TEMPLATE.format(
        reference_type=reference_type,
        reference=reference,
        story_a=story_a,
        story_b=story_b,
    )


_QA_GENERATION_TEMPLATE = """Write three multiple-choice comprehension questions about the scene
described by the script excerpt below, one question per category:
emotional (a character's emotional state), action (what a character
does), relationship (how two characters relate).

Rules:
- Refer to characters only by descriptive references such as "the older
  man" or "the woman in red"; never use proper names.
- Give each question exactly three options with exactly one correct
  answer.
- Answer with one JSON object per line, each shaped as:
  {{"category": "...", "question": "...", "options": ["...", "...", "..."], "correct_index": 0}}

SCRIPT EXCERPT:
{script_context}
"""


def build_qa_generation_prompt(script_context: str) -> str:
    """Deterministic prompt asking the endpoint for the three per-story
    QA items (online-only flow; generated items are persisted as JSONL)."""
    if not script_context:
        raise InputError("script context must be non-empty")
    return _QA_GENERATION_TEMPLATE.format(script_context=script_context)


@dataclass(frozen=True)
class JudgeEndpoint:
    """Chat-completion service descriptor; the auth token is read from the
    named environment variable and never logged."""

    base_url: str
    model: str
    auth_token_env: str = "SCRIPTALIGN_JUDGE_TOKEN"
    timeout_s: float = 60.0
    max_in_flight: int = 4


def load_endpoint(path: str | Path) -> JudgeEndpoint:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return JudgeEndpoint(
            base_url=data["base_url"],
            model=data["model"],
            auth_token_env=data.get("auth_token_env", "SCRIPTALIGN_JUDGE_TOKEN"),
            timeout_s=data.get("timeout_s", 60.0),
            max_in_flight=data.get("max_in_flight", 4),
        )
    except KeyError as exc:
        raise InputError(f"{path}: endpoint descriptor missing key {exc}") from None


def call_judge(
    request: str,
    endpoint: JudgeEndpoint,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """POST a temperature-0 chat completion and return the raw text.

    Retries transient failures (network errors, 429, 5xx) up to three
    attempts with exponential backoff. ``transport`` exists for tests.
    """
    token = os.environ.get(endpoint.auth_token_env, "")
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    payload = {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": request}],
        "temperature": 0,
    }
    url = endpoint.base_url.rstrip("/") + "/chat/completions"

    last_error: Exception = TransportError("judge endpoint never reached")
    for attempt in range(_RETRY_ATTEMPTS):
        if attempt:
            sleep(_BACKOFF_BASE_S * 2 ** (attempt - 1))
        try:
            with httpx.Client(transport=transport, timeout=endpoint.timeout_s) as client:
                response = client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            last_error = TransportError(f"request failed: {exc}")
            continue
        if response.status_code in (401, 403):
            raise AuthError(f"judge endpoint rejected credentials (HTTP {response.status_code})")
        if response.status_code == 429:
            last_error = RateLimited("judge endpoint rate-limited the request")
            continue
        if response.status_code >= 500:
            last_error = TransportError(f"judge endpoint returned HTTP {response.status_code}")
            continue
        if response.status_code != 200:
            raise TransportError(f"unexpected HTTP {response.status_code} from judge endpoint")
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise MalformedResponse(f"cannot read completion text: {exc}") from None
        if not isinstance(content, str):
            raise MalformedResponse(f"completion content is {type(content).__name__}, not text")
        return content
    raise last_error


_DIRECT_RE = re.compile(r"^(A|B|TIE)[.!]?$", re.IGNORECASE)
# after a marker word, "a tie" reads as tie; a bare letter only counts when
# no further word follows, so articles never masquerade as verdicts
_MARKER_RE = re.compile(
    r"\b(?:answer|verdict|winner)\b\s*(?:is)?\s*[:\-]?\s*['\"]?"
    r"(?:(?:an?\s+)?(TIE)|([AB]))(?!\s*\w)",
    re.IGNORECASE,
)
_STANDALONE_RE = re.compile(r"\b(A|B|TIE)\b")  # deliberately case-sensitive


def parse_verdict(raw: str) -> str:
    """Extract the single A/B/TIE token from a judge response.

    Grammar, in priority order: (1) the whole response is the token;
    (2) exactly one value appears after an answer/verdict/winner marker;
    (3) exactly one distinct uppercase standalone A/B/TIE appears anywhere
    (lowercase is skipped there so the article "a" never counts). Anything
    else raises UnparseableVerdict; responses are never coerced.
    """
    text = raw.strip()
    match = _DIRECT_RE.match(text)
    if match:
        return _canonical(match.group(1))
    found = {
        _canonical(tie or letter) for tie, letter in _MARKER_RE.findall(text)
    }
    if not found:
        found = {_canonical(g) for g in _STANDALONE_RE.findall(text)}
    if len(found) == 1:
        return found.pop()
    raise UnparseableVerdict(raw)


def _canonical(token: str) -> str:
    upper = token.upper()
    return "tie" if upper == "TIE" else upper


@dataclass(frozen=True)
class JudgeSample:
    sample_id: str
    reference_type: str
    reference: str
    story_a: str
    story_b: str


def run_pairwise_judging(
    samples: Sequence[JudgeSample],
    endpoint: JudgeEndpoint,
    n_runs: int = 3,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[PairwiseVerdict]:
    """Judge every sample ``n_runs`` times with a concurrency cap.

    Story positions are swapped on even runs to counter position bias;
    winners are reported back in the caller's A/B frame. Results are
    keyed by (sample, run) so completion order never matters.
    """

    def judge_one(sample: JudgeSample, run_id: int) -> PairwiseVerdict:
        swapped = run_id % 2 == 0
        first, second = (
            (sample.story_b, sample.story_a) if swapped else (sample.story_a, sample.story_b)
        )
        prompt = build_pairwise_prompt(first, second, sample.reference, sample.reference_type)
        winner = parse_verdict(call_judge(prompt, endpoint, transport=transport, sleep=sleep))
        if swapped and winner != "tie":
            winner = "B" if winner == "A" else "A"
        return PairwiseVerdict(sample.sample_id, sample.reference_type, run_id, winner)

    tasks = [(s, run) for run in range(1, n_runs + 1) for s in samples]
    with ThreadPoolExecutor(max_workers=max(1, endpoint.max_in_flight)) as pool:
        futures = [pool.submit(judge_one, s, r) for s, r in tasks]
        verdicts = [f.result() for f in futures]
    verdicts.sort(key=lambda v: (v.reference_type, v.run_id, v.sample_id))
    return verdicts


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.1f} ± {std:.1f}"


def format_win_rate_table(
    table: WinRateTable, label_a: str = "A", label_b: str = "B"
) -> str:
    """Rows of 'mean ± std' percentages, one per reference type."""
    header = ["Reference Type", label_a, label_b, "Ties"]
    rows = [header]
    for ref in sorted(table.rows):
        stats = table.rows[ref]
        rows.append(
            [
                ref,
                format_mean_std(stats.win_a_mean, stats.win_a_std),
                format_mean_std(stats.win_b_mean, stats.win_b_std),
                format_mean_std(stats.tie_mean, stats.tie_std),
            ]
        )
    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    ]
    return "\n".join(lines)


def format_qa_table(result: QAResult, label: str = "Model") -> str:
    header = ["Model", "Overall", "Emot.", "Action", "Relat."]
    row = [
        label,
        f"{result.overall_accuracy:.1f}",
        f"{result.per_category['emotional']:.1f}",
        f"{result.per_category['action']:.1f}",
        f"{result.per_category['relationship']:.1f}",
    ]
    widths = [max(len(h), len(r)) for h, r in zip(header, row)]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()
        for cells in (header, row)
    )


def load_verdicts(path: str | Path) -> list[PairwiseVerdict]:
    verdicts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            verdicts.append(
                PairwiseVerdict(
                    str(data["sample_id"]),
                    data["reference_type"],
                    int(data["run_id"]),
                    data["winner"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: bad verdict record ({exc})") from None
    return verdicts


def save_verdicts(verdicts: Sequence[PairwiseVerdict], path: str | Path) -> None:
    lines = [
        json.dumps(
            {
                "sample_id": v.sample_id,
                "reference_type": v.reference_type,
                "run_id": v.run_id,
                "winner": v.winner,
            },
            ensure_ascii=False,
        )
        for v in verdicts
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_qa_items(path: str | Path) -> list[QAItem]:
    items = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            items.append(
                QAItem(
                    str(data["story_id"]),
                    data["category"],
                    data["question"],
                    tuple(data["options"]),
                    int(data["correct_index"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: bad QA item ({exc})") from None
    return items


def load_qa_answers(path: str | Path) -> dict[tuple[str, str], int]:
    answers: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            key = (str(data["story_id"]), data["category"])
            if key in answers:
                raise InputError(f"{path}:{lineno}: duplicate answer for {key}")
            answers[key] = int(data["chosen_index"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{path}:{lineno}: bad QA answer ({exc})") from None
    return answers


def load_judge_samples(path: str | Path) -> list[JudgeSample]:
    samples = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            samples.append(
                JudgeSample(
                    str(data["sample_id"]),
                    data["reference_type"],
                    data["reference"],
                    data["story_a"],
                    data["story_b"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{path}:{lineno}: bad judge sample ({exc})") from None
    return samples


def check_question_names(item: QAItem, character_names: Sequence[str]) -> list[str]:
    """Report character proper names leaking into a question (QA items must
    use descriptive references instead)."""
    problems = []
    question = item.question.lower()
    for name in character_names:
        if name and re.search(rf"\b{re.escape(name.lower())}\b", question):
            problems.append(f"question for {item.story_id}/{item.category} names {name!r}")
    return problems


def table_to_dict(table: WinRateTable) -> dict:
    return {
        "rows": {
            ref: {
                "win_a_mean": s.win_a_mean,
                "win_a_std": s.win_a_std,
                "win_b_mean": s.win_b_mean,
                "win_b_std": s.win_b_std,
                "tie_mean": s.tie_mean,
                "tie_std": s.tie_std,
            }
            for ref, s in sorted(table.rows.items())
        },
        "runs_per_type": dict(sorted(table.runs_per_type.items())),
        "samples_per_type": dict(sorted(table.samples_per_type.items())),
    }


def qa_result_to_dict(result: QAResult) -> dict:
    return {
        "overall_accuracy": result.overall_accuracy,
        "per_category": {c: result.per_category[c] for c in QA_CATEGORIES},
        "n_stories": result.n_stories,
        "n_questions": result.n_questions,
    }
