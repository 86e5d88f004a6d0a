"""Report files, summary tables and leaderboard export."""

from __future__ import annotations

import html
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .evaluators.results import Category
from .orchestrator import RunRecord
from .scoring import SCHEMA_VERSION, CompositeReport, summarize_runs

SUMMARY_FILE = "summary.json"

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


class ResultsError(Exception):
    """The results directory or one of its files cannot be read."""


def record_filename(agent: str, problem_id: str, run_index: int) -> str:
    return f"{_UNSAFE.sub('-', agent)}_{_UNSAFE.sub('-', problem_id)}_{run_index}.json"


def write_json(path: Path, data: Any) -> None:
    # write-then-rename so an interrupted run never leaves a torn file
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def write_record(out_dir: str | Path, record: RunRecord) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / record_filename(record.agent, record.problem_id, record.run_index)
    write_json(path, record.to_dict())
    return path


@dataclass
class LoadedResults:
    reports: list[CompositeReport] = field(default_factory=list)
    invalid: list[dict[str, Any]] = field(default_factory=list)


def _is_record(doc: Any) -> bool:
    return isinstance(doc, dict) and "valid" in doc and "problem_id" in doc and "run_index" in doc


def load_results(results_dir: str | Path) -> LoadedResults:
    """Read every run record in a directory.

    Files that are valid JSON but not run records (summary, leaderboard) are
    skipped. Invalid runs are kept apart: they carry no score.
    """
    root = Path(results_dir)
    if not root.is_dir():
        raise ResultsError(f"{root}: not a directory")
    loaded = LoadedResults()
    for path in sorted(root.glob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ResultsError(f"{path.name}: {exc}") from exc
        if not _is_record(doc):
            continue
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ResultsError(f"{path.name}: unsupported schema_version {doc.get('schema_version')!r}")
        if not doc["valid"] or doc.get("report") is None:
            loaded.invalid.append({"file": path.name, "agent": doc.get("agent"), "problem_id": doc["problem_id"],
                                   "run_index": doc["run_index"], "error": doc.get("error")})
            continue
        try:
            loaded.reports.append(CompositeReport.from_dict(doc["report"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ResultsError(f"{path.name}: malformed report ({exc})") from exc
    return loaded


@dataclass(frozen=True)
class LeaderboardEntry:
    agent_name: str
    mean_composite: float
    gate_pass_rate: float
    per_category_means: dict[str, float]
    per_problem_means: dict[str, float]
    runs_counted: int

    def __post_init__(self) -> None:
        if self.runs_counted < 1:
            raise ValueError("runs_counted must be >= 1")
        if not 0.0 <= self.mean_composite <= 100.0:
            raise ValueError(f"mean_composite {self.mean_composite} outside [0, 100]")
        if not 0.0 <= self.gate_pass_rate <= 1.0:
            raise ValueError(f"gate_pass_rate {self.gate_pass_rate} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_name": self.agent_name,
            "mean_composite": self.mean_composite,
            "gate_pass_rate": self.gate_pass_rate,
            "per_category_means": dict(self.per_category_means),
            "per_problem_means": dict(self.per_problem_means),
            "runs_counted": self.runs_counted,
        }


def leaderboard(reports: Sequence[CompositeReport]) -> list[LeaderboardEntry]:
    """One entry per agent, best mean composite first."""
    agents = summarize_runs(reports, "agent")
    per_problem = summarize_runs(reports, "agent_problem")
    entries = []
    for row in agents:
        problems = {p["problem_id"]: p["mean_composite"] for p in per_problem if p["agent"] == row["agent"]}
        entries.append(LeaderboardEntry(row["agent"], row["mean_composite"], row["gate_pass_rate"],
                                        row["category_means"], problems, row["runs"]))
    return sorted(entries, key=lambda e: (-e.mean_composite, e.agent_name))


def build_summary(loaded: LoadedResults) -> dict[str, Any]:
    reports = loaded.reports
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "rows": summarize_runs(reports, "agent_problem"),
        "agents": summarize_runs(reports, "agent"),
        "problems": summarize_runs(reports, "problem"),
        "invalid_runs": list(loaded.invalid),
    }


def _fmt(value: float | None, digits: int = 1) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{digits}f}"


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = [headers, ["-" * w for w in widths], *rows]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in lines)


def render_text(summary: dict[str, Any]) -> str:
    cats = [c.value for c in Category]
    parts = ["Per agent and problem"]
    parts.append(_table(
        ["agent", "problem", "runs", "mean", "pass", "zero", ">80"],
        [[r["agent"], r["problem_id"], str(r["runs"]), _fmt(r["mean_composite"]), _fmt(r["gate_pass_rate"], 3),
          str(r["zero_scores"]), str(r["scores_above_80"])] for r in summary["rows"]],
    ))
    parts.append("\nPer agent totals")
    parts.append(_table(
        ["agent", "runs", "mean", "pass"],
        [[r["agent"], str(r["runs"]), _fmt(r["mean_composite"]), _fmt(r["gate_pass_rate"], 3)]
         for r in summary["agents"]],
    ))
    parts.append("\nCategory means (gate-passed runs only)")
    parts.append(_table(
        ["agent", *cats],
        [[r["agent"], *(_fmt(r["category_means"].get(c), 3) for c in cats)] for r in summary["agents"]],
    ))
    if summary["invalid_runs"]:
        parts.append(f"\nInvalid runs (not scored): {len(summary['invalid_runs'])}")
        parts += [f"  {i['file']}: {i['error']}" for i in summary["invalid_runs"]]
    return "\n".join(parts) + "\n"


def render_html(summary: dict[str, Any]) -> str:
    """Static page; the chart data is embedded as JSON for any client-side plotting."""
    chart = {
        "labels": [f"{r['agent']}/{r['problem_id']}" for r in summary["rows"]],
        "mean_composite": [r["mean_composite"] for r in summary["rows"]],
    }
    rows = "".join(
        f"<tr><td>{html.escape(r['agent'])}</td><td>{html.escape(r['problem_id'])}</td><td>{r['runs']}</td>"
        f"<td>{_fmt(r['mean_composite'])}</td><td>{_fmt(r['gate_pass_rate'], 3)}</td></tr>"
        for r in summary["rows"]
    )
    data = json.dumps(chart).replace("</", "<\\/")
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Evaluation summary</title></head><body>\n"
        "<h1>Evaluation summary</h1>\n<table border=\"1\"><thead><tr><th>agent</th><th>problem</th><th>runs</th>"
        f"<th>mean</th><th>pass rate</th></tr></thead><tbody>{rows}</tbody></table>\n"
        f"<script type=\"application/json\" id=\"chart-data\">{data}</script>\n</body></html>\n"
    )
