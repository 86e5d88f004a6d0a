from __future__ import annotations

import json
from pathlib import Path

import pytest

from codegauntlet.a2a import SourceFile, SubmissionArtifact
from codegauntlet.sandbox import LocalToolClient, SandboxService, load_profile

FIXTURES = Path(__file__).parent / "fixtures"
PROGRAMS = FIXTURES / "programs"
CORPUS = FIXTURES / "corpus"
PROBLEMS = FIXTURES / "problems"
TEST_PROFILE = FIXTURES / "profile-minipetsc.json"


def program_artifact(name: str, run_args: tuple[str, ...] = (), task_id: str = "") -> SubmissionArtifact:
    """Wrap one fixture program as a single-file submission named main.c."""
    content = (PROGRAMS / name).read_text()
    return SubmissionArtifact(task_id, (SourceFile("main.c", content),), "main.c", run_args=run_args)


def corpus_artifact(name: str) -> SubmissionArtifact:
    return SubmissionArtifact("t", (SourceFile(name, (CORPUS / name).read_text()),), name)


@pytest.fixture(scope="session")
def test_profile():
    return load_profile(TEST_PROFILE)


@pytest.fixture
def service(tmp_path, test_profile):
    svc = SandboxService(test_profile, tmp_path / "sandbox")
    yield svc
    svc.close()


@pytest.fixture
def local_tools(service):
    return LocalToolClient(service)


# -- acceptance summary ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test decides")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _CRITERIA.setdefault(number, (title, []))
            item.user_properties.append(("criterion", number))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    number = props["criterion"]
    outcomes = _CRITERIA[number][1]
    if report.when == "call" or report.outcome == "failed" or report.skipped:
        outcomes.append("passed" if report.passed else report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        ok = bool(outcomes) and all(o == "passed" for o in outcomes)
        status = "PASS" if ok else ("NOT RUN" if not outcomes else "FAIL")
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


def load_json(path: Path):
    return json.loads(Path(path).read_text())
