from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PROBLEMS
from codegauntlet.errors import DuplicateId, ExtractionError, ParseError, SchemaError
from codegauntlet.problems import (
    ExtractionPattern,
    HarnessDefaults,
    extract_output,
    load_problem,
    load_registry,
    problem_from_dict,
    problem_to_dict,
)


def minimal(**overrides):
    doc = {
        "problem_id": "p1",
        "problem_name": "Problem one",
        "problem_description": "Print final_norm.",
        "test_cases": [{"case_id": "a", "run_args": [], "reference_values": [2.5],
                        "extraction_rule": [{"label": "final_norm"}]}],
    }
    doc.update(overrides)
    return doc


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_full_file_keeps_values(tmp_path):
    doc = minimal(difficulty="hard", module_tag="KSP", accuracy_tolerance=1e-8, time_thresholds=[2, 4, 8, 16])
    doc["test_cases"][0].update(mpi_ranks=4, timeout_seconds=30)
    spec = load_problem(write(tmp_path / "p.json", doc))
    assert spec.difficulty == "hard" and spec.module_tag == "KSP"
    assert spec.accuracy_tolerance == 1e-8
    assert spec.time_thresholds == (2.0, 4.0, 8.0, 16.0)
    case = spec.test_cases[0]
    assert case.mpi_ranks == 4 and case.timeout_seconds == 30.0


def test_defaults_applied(tmp_path):
    spec = load_problem(write(tmp_path / "p.json", minimal()))
    assert spec.accuracy_tolerance == 1e-6
    assert spec.time_thresholds == (1.0, 5.0, 15.0, 60.0)
    assert spec.test_cases[0].mpi_ranks == 1
    assert spec.test_cases[0].timeout_seconds == 120.0


def test_harness_defaults_are_fallbacks_only(tmp_path):
    defaults = HarnessDefaults(accuracy_tolerance=1e-3, time_thresholds=(2.0, 3.0, 4.0, 5.0))
    spec = problem_from_dict(minimal(), defaults)
    assert spec.accuracy_tolerance == 1e-3
    explicit = problem_from_dict(minimal(accuracy_tolerance=1e-9), defaults)
    assert explicit.accuracy_tolerance == 1e-9


@pytest.mark.parametrize("field, doc", [
    ("time_thresholds", minimal(time_thresholds=[5, 1, 15, 60])),
    ("accuracy_tolerance", minimal(accuracy_tolerance=0)),
    ("test_cases", minimal(test_cases=[])),
    ("problem_id", minimal(problem_id="")),
    ("difficulty", minimal(difficulty="brutal")),
])
def test_schema_errors_name_the_field(field, doc):
    with pytest.raises(SchemaError) as info:
        problem_from_dict(doc)
    assert field in info.value.field


def test_missing_required_field():
    doc = minimal()
    del doc["problem_description"]
    with pytest.raises(SchemaError, match="problem_description"):
        problem_from_dict(doc)


def test_rule_length_must_match_references():
    doc = minimal()
    doc["test_cases"][0]["reference_values"] = [1.0, 2.0]
    with pytest.raises(SchemaError, match="extraction_rule"):
        problem_from_dict(doc)


def test_pattern_needs_one_group():
    doc = minimal()
    doc["test_cases"][0]["extraction_rule"] = [{"label": "x", "pattern": r"x = \d+"}]
    with pytest.raises(SchemaError, match="capture group"):
        problem_from_dict(doc)


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_problem(path)


def test_registry_empty_and_ordered(tmp_path):
    assert load_registry(tmp_path) == []
    write(tmp_path / "b.json", minimal(problem_id="second"))
    write(tmp_path / "a.json", minimal(problem_id="first"))
    assert [p.problem_id for p in load_registry(tmp_path)] == ["first", "second"]
    assert load_registry(tmp_path) == load_registry(tmp_path)


def test_registry_duplicate_id(tmp_path):
    write(tmp_path / "a.json", minimal())
    write(tmp_path / "b.json", minimal())
    with pytest.raises(DuplicateId):
        load_registry(tmp_path)


def test_fixture_registry_loads():
    specs = load_registry(PROBLEMS)
    assert len(specs) == 6
    assert specs[0].problem_id == "vec_norm2"


# -- extraction ----------------------------------------------------------------

def test_extract_single_label():
    assert extract_output("final_norm = 2.5\n", (ExtractionPattern.of("final_norm"),)) == [2.5]


def test_extract_missing_label():
    with pytest.raises(ExtractionError, match="final_norm"):
        extract_output("nothing here", (ExtractionPattern.of("final_norm"),))


def test_extract_follows_rule_order_not_stdout_order():
    stdout = "iters = 12\nresidual: 3.5e-09\n"
    rule = (ExtractionPattern.of("residual"), ExtractionPattern.of("iters"))
    assert extract_output(stdout, rule) == [3.5e-09, 12.0]


def test_extract_last_occurrence_wins():
    assert extract_output("x = 1\nx = 2\n", (ExtractionPattern.of("x"),)) == [2.0]


def test_extract_label_is_not_a_suffix_match():
    assert extract_output("a = 2\nba = 1\n", (ExtractionPattern.of("a"),)) == [2.0]


def test_extract_rejects_nonfinite():
    rule = (ExtractionPattern("x", r"x = (\S+)"),)
    with pytest.raises(ExtractionError):
        extract_output("x = nan", rule)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
labels = st.from_regex(r"[a-z][a-z_]{0,8}", fullmatch=True)


@given(st.dictionaries(labels, finite, min_size=1, max_size=5), st.randoms())
def test_extract_roundtrips_printed_values(values, rnd):
    names = list(values)
    printed = names[:]
    rnd.shuffle(printed)
    stdout = "".join(f"{n} = {values[n]!r}\n" for n in printed)
    rule = tuple(ExtractionPattern.of(n) for n in names)
    assert extract_output(stdout, rule) == [values[n] for n in names]


@given(st.text(max_size=200))
def test_extract_is_pure(stdout):
    rule = (ExtractionPattern.of("v"),)
    outcomes = []
    for _ in range(2):
        try:
            outcomes.append(extract_output(stdout, rule))
        except ExtractionError as exc:
            outcomes.append(str(exc))
    assert outcomes[0] == outcomes[1]


# -- round trip ------------------------------------------------------------------

positive = st.floats(min_value=1e-9, max_value=1e6, allow_nan=False)


@st.composite
def problem_docs(draw):
    n_cases = draw(st.integers(1, 3))
    cases = []
    for i in range(n_cases):
        k = draw(st.integers(1, 3))
        case = {"case_id": f"c{i}", "run_args": draw(st.lists(st.text(max_size=5), max_size=3)),
                "reference_values": draw(st.lists(finite, min_size=k, max_size=k)),
                "extraction_rule": [{"label": f"v{j}"} for j in range(k)]}
        if draw(st.booleans()):
            case["mpi_ranks"] = draw(st.integers(1, 8))
        if draw(st.booleans()):
            case["timeout_seconds"] = draw(positive)
        cases.append(case)
    doc = minimal(test_cases=cases)
    if draw(st.booleans()):
        doc["accuracy_tolerance"] = draw(positive)
    if draw(st.booleans()):
        ts = sorted(set(draw(st.lists(positive, min_size=4, max_size=4, unique=True))))
        if len(ts) == 4:
            doc["time_thresholds"] = ts
    if draw(st.booleans()):
        doc["difficulty"] = draw(st.sampled_from(["easy", "medium", "hard"]))
    return doc


@settings(max_examples=60)
@given(problem_docs())
def test_serialize_roundtrip(doc):
    spec = problem_from_dict(doc)
    again = problem_from_dict(json.loads(json.dumps(problem_to_dict(spec))))
    assert again == spec
    assert all(math.isfinite(v) for c in spec.test_cases for v in c.reference_values)
