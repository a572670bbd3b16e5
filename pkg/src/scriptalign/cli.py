"""Command-line entry point: parse-script, parse-srt, align, extract,
stats, and eval subcommands over file-based artifacts."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import evaluation, grounding, screenplay, segment, subtitle
from .align import align as run_alignment
from .align import attribute_dialogue, line_to_dict, result_from_dict, result_to_dict
from .config import (
    DEFAULT_PIPELINE_CONFIG,
    PipelineConfig,
    config_echo,
    load_pipeline_config,
)
from .errors import EncodingError, InputError, ScriptAlignError

SCHEMA_VERSION = "1"

log = logging.getLogger("scriptalign")


def main() -> None:
    sys.exit(run(sys.argv[1:]))


def run(argv: list[str]) -> int:
    """Dispatch a CLI invocation; 0 ok, 1 input/usage error, 2 internal."""
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1

    try:
        cfg = _effective_config(args)
    except (ScriptAlignError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    logging.basicConfig(
        stream=sys.stderr, level=getattr(logging, cfg.log_level), format="%(levelname)s %(message)s"
    )
    try:
        return args.handler(args, cfg)
    except (ScriptAlignError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 1
    except Exception:
        log.exception("internal error")
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scriptalign",
        description="Align movie screenplays with subtitles and post-process the results.",
    )
    parser.add_argument("--config", metavar="PATH", help="pipeline config file (TOML or JSON)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("parse-script", help="parse a screenplay .txt into structured JSON")
    p.add_argument("script", help="screenplay text file (UTF-8)")
    p.add_argument("-o", "--output", help="output JSON path (stdout when omitted)")
    p.set_defaults(handler=cmd_parse_script)

    p = sub.add_parser("parse-srt", help="parse an .srt subtitle file into JSON cues")
    p.add_argument("srt", help="subtitle file (UTF-8, optional BOM)")
    p.add_argument("-o", "--output", help="output JSON path (stdout when omitted)")
    p.set_defaults(handler=cmd_parse_srt)

    p = sub.add_parser("align", help="align parsed screenplay JSON with an .srt track")
    p.add_argument("--script", help="parse-script JSON output")
    p.add_argument("--srt", help="subtitle .srt file")
    p.add_argument("--movie-id", help="identifier stored in the alignment output")
    p.add_argument("-o", "--output", help="output JSON path (stdout when omitted)")
    p.add_argument("--batch", help="JSONL manifest of {script, srt, output, movie_id} jobs")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel batch jobs")
    p.add_argument("--min-score", type=float, help="override align.min_score")
    p.add_argument("--min-anchor-len", type=int, help="override align.min_anchor_len")
    p.set_defaults(handler=cmd_align)

    p = sub.add_parser("extract", help="extract per-story script context")
    p.add_argument("--alignment", required=True, help="align JSON output")
    p.add_argument("--script", required=True, help="parse-script JSON output")
    p.add_argument("--stories", required=True, help="story ingestion JSONL")
    p.add_argument("--out-dir", required=True, help="directory for per-story outputs")
    p.add_argument("--pad-ms", type=int, help="override segment.pad_ms")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("stats", help="grounding-tag corpus statistics")
    p.add_argument("--stories", help="stories JSONL with a story_text field")
    p.add_argument("--dataset-dir", help="directory of <story_id>.txt story files")
    p.add_argument("-o", "--output", help="stats JSON path (stdout when omitted)")
    p.add_argument("--csv", help="per-story breakdown CSV path")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("eval", help="evaluation harness")
    eval_sub = p.add_subparsers(dest="eval_command", metavar="SUBCOMMAND")

    q = eval_sub.add_parser("aggregate", help="aggregate pairwise verdicts into win rates")
    q.add_argument("--verdicts", required=True, help="verdict JSONL")
    q.add_argument("--label-a", default="A", help="display label for system A")
    q.add_argument("--label-b", default="B", help="display label for system B")
    q.add_argument("-o", "--output", help="JSON output path")
    q.set_defaults(handler=cmd_eval_aggregate)

    q = eval_sub.add_parser("qa-score", help="score QA answers against items")
    q.add_argument("--items", required=True, help="QA items JSONL")
    q.add_argument("--answers", required=True, help="QA answers JSONL")
    q.add_argument("--label", default="Model", help="display label for the table")
    q.add_argument("-o", "--output", help="JSON output path")
    q.set_defaults(handler=cmd_eval_qa_score)

    q = eval_sub.add_parser("judge", help="run pairwise judging against an endpoint (online)")
    q.add_argument("--samples", required=True, help="judge samples JSONL")
    q.add_argument("--endpoint", required=True, help="endpoint descriptor JSON")
    q.add_argument("--runs", type=int, default=3, help="independent runs (default 3)")
    q.add_argument("-o", "--output", required=True, help="verdict JSONL output path")
    q.set_defaults(handler=cmd_eval_judge)

    return parser


def _effective_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_pipeline_config(args.config) if args.config else DEFAULT_PIPELINE_CONFIG
    align_cfg = cfg.align
    if getattr(args, "min_score", None) is not None:
        if not 0.0 <= args.min_score <= 1.0:
            raise InputError(f"--min-score: must be within [0, 1], got {args.min_score}")
        align_cfg = replace(align_cfg, min_score=args.min_score)
    if getattr(args, "min_anchor_len", None) is not None:
        if args.min_anchor_len < 1:
            raise InputError(f"--min-anchor-len: must be >= 1, got {args.min_anchor_len}")
        align_cfg = replace(align_cfg, min_anchor_len=args.min_anchor_len)
    cfg = replace(cfg, align=align_cfg)
    if getattr(args, "pad_ms", None) is not None:
        if args.pad_ms < 0:
            raise InputError(f"--pad-ms: must be >= 0, got {args.pad_ms}")
        cfg = replace(cfg, pad_ms=args.pad_ms)
    if getattr(args, "handler", None) is None:
        raise InputError("no subcommand given")
    return cfg


def _read_text_strict(path: str) -> str:
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: not valid UTF-8 ({exc})") from None


def _emit_json(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if output:
        _write_atomic(Path(output), text)
    else:
        sys.stdout.write(text)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _report_warnings(warnings: list[str]) -> None:
    for message in warnings:
        log.warning("%s", message)
    if warnings:
        log.warning("%d warning(s) total", len(warnings))


def cmd_parse_script(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    sp = screenplay.parse_screenplay(_read_text_strict(args.script))
    blocks = screenplay.extract_dialogue_blocks(sp)
    warnings = list(sp.warnings) + screenplay.block_warnings(blocks)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "source": args.script,
        **screenplay.to_dict(sp),
        "dialogue_blocks": [screenplay.block_to_dict(b) for b in blocks],
        "config_echo": config_echo(cfg),
    }
    _emit_json(payload, args.output)
    _report_warnings(warnings)
    return 0


def cmd_parse_srt(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    track = subtitle.read_srt(args.srt)
    payload = {
        "schema_version": SCHEMA_VERSION,
        **subtitle.track_to_dict(track),
        "config_echo": config_echo(cfg),
    }
    _emit_json(payload, args.output)
    _report_warnings(list(track.warnings))
    return 0


def _align_payload(
    script_path: str, srt_path: str, movie_id: str | None, cfg: PipelineConfig
) -> tuple[dict, list[str]]:
    sp = screenplay.from_dict(json.loads(_read_text_strict(script_path)))
    track = subtitle.read_srt(srt_path)
    result = replace(run_alignment(sp, track, cfg.align), movie_id=movie_id)
    blocks = screenplay.extract_dialogue_blocks(sp)
    lines = attribute_dialogue(result, blocks, track)
    payload = {
        "schema_version": SCHEMA_VERSION,
        **result_to_dict(result),
        "attributed_lines": [line_to_dict(line) for line in lines],
        "config_echo": config_echo(cfg),
    }
    return payload, list(track.warnings)


def cmd_align(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    if args.batch:
        return _run_align_batch(args, cfg)
    if not (args.script and args.srt):
        raise InputError("align needs --script and --srt (or --batch)")
    payload, warnings = _align_payload(args.script, args.srt, args.movie_id, cfg)
    _emit_json(payload, args.output)
    _report_warnings(warnings)
    return 0


def _run_batch_job(job: dict, cfg: PipelineConfig) -> tuple[str, str | None]:
    """One batch alignment; returns (output path, error message or None)."""
    try:
        payload, _ = _align_payload(job["script"], job["srt"], job.get("movie_id"), cfg)
        text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
        _write_atomic(Path(job["output"]), text)
        return job["output"], None
    except (ScriptAlignError, OSError, json.JSONDecodeError, KeyError) as exc:
        return job.get("output", "?"), f"{type(exc).__name__}: {exc}"


def _run_align_batch(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    jobs = []
    for lineno, line in enumerate(_read_text_strict(args.batch).splitlines(), 1):
        if not line.strip():
            continue
        job = json.loads(line)
        for key in ("script", "srt", "output"):
            if key not in job:
                raise InputError(f"{args.batch}:{lineno}: batch job missing {key!r}")
        jobs.append(job)
    if not jobs:
        raise InputError(f"{args.batch}: no jobs")

    failures = 0
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_run_batch_job, jobs, [cfg] * len(jobs)))
    else:
        outcomes = [_run_batch_job(job, cfg) for job in jobs]
    for output, error in outcomes:
        if error:
            failures += 1
            log.error("%s: %s", output, error)
        else:
            log.info("wrote %s", output)
    return 1 if failures else 0


_UNSAFE_FILENAME_RE = re.compile(r"[^A-Za-z0-9._-]+")


def cmd_extract(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    result = result_from_dict(json.loads(_read_text_strict(args.alignment)))
    sp = screenplay.from_dict(json.loads(_read_text_strict(args.script)))
    records = segment.load_story_records(args.stories)
    out_dir = Path(args.out_dir)
    empties = 0
    for record in records:
        ctx = segment.extract_context(
            segment.frame_range_of(record), result, sp, pad_ms=cfg.pad_ms
        )
        payload = {
            "schema_version": SCHEMA_VERSION,
            **segment.context_to_dict(ctx),
            "config_echo": config_echo(cfg),
        }
        stem = _UNSAFE_FILENAME_RE.sub("_", record.story_id) or "story"
        _write_atomic(out_dir / f"{stem}.json", json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
        _write_atomic(out_dir / f"{stem}.txt", segment.render_context(ctx) + "\n")
        empties += ctx.empty
    log.info("extracted %d stories (%d with no overlapping segments)", len(records), empties)
    return 0


def _load_stories_for_stats(args: argparse.Namespace) -> list[grounding.GroundedStory]:
    stories = []
    if args.stories:
        for lineno, line in enumerate(_read_text_strict(args.stories).splitlines(), 1):
            if not line.strip():
                continue
            data = json.loads(line)
            if "story_text" not in data or data["story_text"] is None:
                raise InputError(f"{args.stories}:{lineno}: record has no story_text")
            story_id = str(data.get("story_id", f"story{lineno}"))
            stories.append(grounding.parse_grounded_story(data["story_text"], story_id))
    elif args.dataset_dir:
        paths = sorted(Path(args.dataset_dir).glob("*.txt"))
        if not paths:
            raise InputError(f"{args.dataset_dir}: no .txt story files")
        for path in paths:
            stories.append(grounding.parse_grounded_story(_read_text_strict(path), path.stem))
    else:
        raise InputError("stats needs --stories or --dataset-dir")
    return stories


def cmd_stats(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    stories = _load_stories_for_stats(args)
    stats = grounding.compute_stats(stories)
    payload = {
        "schema_version": SCHEMA_VERSION,
        **grounding.stats_to_dict(stats),
        "config_echo": config_echo(cfg),
    }
    _emit_json(payload, args.output)
    if args.csv:
        _write_atomic(Path(args.csv), _stats_csv(stories))
    warnings = [f"{s.story_id}: {w}" for s in stories for w in s.warnings]
    _report_warnings(warnings)
    return 0


def _stats_csv(stories: list[grounding.GroundedStory]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "story_id",
            "word_count",
            "distinct_characters",
            "char_mentions",
            "object_refs",
            "setting_refs",
            "action_refs",
            "image_refs",
            "refs_total",
            "warnings",
        ]
    )
    for story in stories:
        counts = grounding.story_counts(story)
        writer.writerow(
            [
                story.story_id,
                story.word_count,
                story.distinct_characters,
                counts["char_mentions"],
                counts["object_refs"],
                counts["setting_refs"],
                counts["action_refs"],
                counts["image_refs"],
                counts["refs_total"],
                len(story.warnings),
            ]
        )
    return buf.getvalue()


def cmd_eval_aggregate(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    verdicts = evaluation.load_verdicts(args.verdicts)
    table = evaluation.aggregate_pairwise(verdicts)
    print(evaluation.format_win_rate_table(table, args.label_a, args.label_b))
    if args.output:
        payload = {
            "schema_version": SCHEMA_VERSION,
            **evaluation.table_to_dict(table),
            "config_echo": config_echo(cfg),
        }
        _write_atomic(Path(args.output), json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
    return 0


def cmd_eval_qa_score(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    items = evaluation.load_qa_items(args.items)
    answers = evaluation.load_qa_answers(args.answers)
    result = evaluation.score_qa(items, answers)
    print(evaluation.format_qa_table(result, args.label))
    if args.output:
        payload = {
            "schema_version": SCHEMA_VERSION,
            **evaluation.qa_result_to_dict(result),
            "config_echo": config_echo(cfg),
        }
        _write_atomic(Path(args.output), json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
    return 0


def cmd_eval_judge(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    samples = evaluation.load_judge_samples(args.samples)
    endpoint = evaluation.load_endpoint(args.endpoint)
    if args.runs < 1:
        raise InputError(f"--runs: must be >= 1, got {args.runs}")
    verdicts = evaluation.run_pairwise_judging(samples, endpoint, n_runs=args.runs)
    evaluation.save_verdicts(verdicts, args.output)
    log.info("wrote %d verdicts to %s", len(verdicts), args.output)
    return 0
