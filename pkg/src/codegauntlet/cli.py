"""Command line for running evaluations, summarizing results and serving a mock agent."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Sequence

from .a2a import load_script, serve_mock_purple
from .errors import ConfigError, HarnessError
from .evaluators.judge import HttpJudge, JudgeClient, MockJudge
from .evaluators.rules import load_rules
from .orchestrator import EvaluationJob, RunRecord, evaluate_suite
from .problems import load_registry
from .reporting import (
    SUMMARY_FILE,
    LoadedResults,
    ResultsError,
    build_summary,
    leaderboard,
    load_results,
    render_html,
    render_text,
    write_json,
    write_record,
)
from .sandbox.client import HttpToolClient
from .sandbox.profile import load_profile
from .scoring import CompositeReport, ScoringConfig

log = logging.getLogger("codegauntlet")

EXIT_OK, EXIT_INFRA, EXIT_CONFIG = 0, 1, 2


def parse_judge(spec: str) -> JudgeClient:
    """``mock``, ``mock:<pinned.json>`` or ``http:<url>``."""
    if spec == "mock":
        return MockJudge()
    if spec.startswith("mock:"):
        path = Path(spec[5:])
        try:
            pinned = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read pinned verdicts {path}: {exc}") from exc
        if not isinstance(pinned, dict):
            raise ConfigError(f"{path}: pinned verdicts must be a JSON object")
        return MockJudge(pinned)
    if spec.startswith("http:"):
        url = spec[5:]
        # accept both http:http://host/... and http://host/...
        return HttpJudge(url if "://" in url else "http:" + url)
    raise ConfigError(f"unknown judge {spec!r}; use mock, mock:<file> or http:<url>")


def _load_weights(path: str | None) -> ScoringConfig:
    if path is None:
        return ScoringConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read weights {path}: {exc}") from exc
    return ScoringConfig.from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        problems = load_registry(args.problems)
        profile = load_profile(args.profile)
        judge = parse_judge(args.judge)
        rules = load_rules(args.rules) if args.rules else None
        scoring = _load_weights(args.weights)
        if args.repetitions < 1 or args.parallel < 1:
            raise ConfigError("--repetitions and --parallel must be >= 1")
    except HarnessError as exc:
        print(f"codegauntlet run: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tools = HttpToolClient(args.tools)
    jobs = [
        EvaluationJob(spec=p, agent_endpoint=args.agent, tools=tools, profile=profile, judge=judge,
                      scoring=scoring, repetitions=args.repetitions, keep_artifacts=args.keep_artifacts,
                      agent_name=args.agent_name, rules=rules)
        for p in problems
    ]
    lock = threading.Lock()

    def on_record(record: RunRecord) -> None:
        # written as each run finishes, so a crash keeps what was done
        with lock:
            write_record(out, record)
        status = "invalid" if not record.valid else f"S={record.report.composite:.2f}"
        log.info("%s %s run %d: %s", record.agent, record.problem_id, record.run_index, status)

    records = evaluate_suite(jobs, parallelism=args.parallel, on_record=on_record)
    loaded = LoadedResults(
        reports=[r.report for r in records if r.valid and r.report is not None],
        invalid=[{"file": None, "agent": r.agent, "problem_id": r.problem_id, "run_index": r.run_index,
                  "error": r.error} for r in records if not r.valid],
    )
    write_json(out / SUMMARY_FILE, build_summary(loaded))
    if args.leaderboard:
        _write_leaderboard(Path(args.leaderboard), loaded.reports)
    invalid = len(loaded.invalid)
    print(f"{len(records)} runs, {invalid} invalid; results in {out}")
    if invalid:
        for entry in loaded.invalid:
            print(f"infrastructure error: {entry['problem_id']} run {entry['run_index']}: {entry['error']}",
                  file=sys.stderr)
        return EXIT_INFRA
    return EXIT_OK


def _write_leaderboard(path: Path, reports: Sequence[CompositeReport]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    write_json(path, [e.to_dict() for e in leaderboard(reports)])


def cmd_report(args: argparse.Namespace) -> int:
    try:
        loaded = load_results(args.results)
    except ResultsError as exc:
        print(f"codegauntlet report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = build_summary(loaded)
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    elif args.format == "html":
        sys.stdout.write(render_html(summary))
    else:
        sys.stdout.write(render_text(summary))
    if args.leaderboard:
        _write_leaderboard(Path(args.leaderboard), loaded.reports)
    return EXIT_OK


def cmd_mock_purple(args: argparse.Namespace) -> int:
    try:
        script = load_script(args.script)
        handle = serve_mock_purple(script, args.port, args.host)
    except (OSError, ValueError, HarnessError) as exc:
        print(f"codegauntlet mock-purple: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"mock agent serving {len(script)} problem(s) at {handle.url}", flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    handle.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codegauntlet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate an agent on a problem set")
    run.add_argument("--problems", required=True, help="directory of problem JSON files")
    run.add_argument("--agent", required=True, help="agent base URL")
    run.add_argument("--tools", required=True, help="tool server URL")
    run.add_argument("--judge", default="mock", help="mock, mock:<pinned.json> or http:<url>")
    run.add_argument("--profile", default="plain-c", help="toolchain profile path or built-in name")
    run.add_argument("--repetitions", type=int, default=3)
    run.add_argument("--out", required=True, help="results directory")
    run.add_argument("--parallel", type=int, default=1, help="concurrent runs")
    run.add_argument("--keep-artifacts", action="store_true")
    run.add_argument("--agent-name", default="agent", help="label used in reports and file names")
    run.add_argument("--rules", help="static-analysis rule file (default: built-in)")
    run.add_argument("--weights", help="JSON object of category weights")
    run.add_argument("--leaderboard", help="also write a leaderboard JSON here")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summarize a results directory")
    rep.add_argument("--results", required=True)
    rep.add_argument("--format", choices=("text", "json", "html"), default="text")
    rep.add_argument("--leaderboard", help="write a leaderboard JSON here")
    rep.set_defaults(func=cmd_report)

    mock = sub.add_parser("mock-purple", help="serve scripted submissions as an agent")
    mock.add_argument("--script", required=True, help="JSON mapping problem_id to artifact")
    mock.add_argument("--port", type=int, default=9001)
    mock.add_argument("--host", default="127.0.0.1")
    mock.set_defaults(func=cmd_mock_purple)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is already our config-error code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
