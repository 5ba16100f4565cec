import json
import random

import pytest
from hypothesis import given, strategies as st

from culprit.model import (
    CommitId,
    CoverageMatrix,
    ElementId,
    EvolveRelation,
    FormatError,
    Outcome,
    TestId,
    ValidationError,
    class_name_of,
    covered_class_names,
    parse_coverage,
    parse_evolve,
    select_relevant_tests,
    write_coverage,
    write_evolve,
)


def write_json(tmp_path, data, name="cov.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_parse_coverage_two_tests(tmp_path):
    p = write_json(tmp_path, {"tests": [
        {"name": "a.T::f", "outcome": "FAIL", "covered": [
            {"file": "A.java", "line": 1}, {"file": "A.java", "line": 2}, {"file": "B.java", "line": 7}]},
        {"name": "a.T::g", "outcome": "PASS", "covered": [{"file": "A.java", "line": 1}]},
    ]})
    m = parse_coverage(p)
    assert len(m.tests) == 2
    assert len(m.failing_tests) == 1
    assert len(m.elements) == 3
    assert m.covers("a.T::g", ElementId("A.java", 1))
    assert not m.covers("a.T::g", ElementId("A.java", 2))


def test_duplicate_test_name_rejected(tmp_path):
    t = {"name": "x", "outcome": "FAIL", "covered": []}
    with pytest.raises(ValidationError, match="duplicate"):
        parse_coverage(write_json(tmp_path, {"tests": [t, t]}))


def test_no_failing_test_rejected(tmp_path):
    p = write_json(tmp_path, {"tests": [{"name": "x", "outcome": "PASS", "covered": []}]})
    with pytest.raises(ValidationError, match="no failing"):
        parse_coverage(p)


@pytest.mark.parametrize("bad, where", [
    ({"tests": [{"name": "x", "outcome": "MAYBE"}]}, "tests[0].outcome"),
    ({"tests": [{"name": "", "outcome": "FAIL"}]}, "tests[0].name"),
    ({"tests": [{"name": "x", "outcome": "FAIL", "covered": [{"file": "A", "line": 0}]}]},
     "tests[0].covered[0].line"),
    ({"tests": [{"name": "x", "outcome": "FAIL", "covered": [{"line": 3}]}]},
     "tests[0].covered[0].file"),
    ({"cases": []}, "'tests'"),
])
def test_malformed_coverage_names_field(tmp_path, bad, where):
    with pytest.raises(FormatError) as err:
        parse_coverage(write_json(tmp_path, bad))
    assert where in str(err.value)


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"tests": [\n  {"name": "x",\n  oops}\n]}')
    with pytest.raises(FormatError, match="line 3"):
        parse_coverage(p)


relevant_suite = [
    "org.joda.time.field.TestFieldUtils::testSafeMultiplyLongInt",
    "org.joda.time.TestIllegalFieldValueException::testGJCutover",
    "org.joda.time.TestIllegalFieldValueException::testJulianYearZero",
    "org.joda.time.TestIllegalFieldValueException::testOtherConstructors",
    "org.joda.time.TestIllegalFieldValueException::testReadablePartialValidate",
    "org.joda.time.TestIllegalFieldValueException::testSetText",
    "org.joda.time.TestIllegalFieldValueException::testSkipDateTimeField",
    "org.joda.time.TestIllegalFieldValueException::testVerifyValueBounds",
    "org.joda.time.TestIllegalFieldValueException::testZoneTransition",
    "org.joda.time.field.TestFieldUtils::testSafeAddInt",
    "org.joda.time.field.TestFieldUtils::testSafeAddLong",
    "org.joda.time.field.TestFieldUtils::testSafeMultiplyLongLong",
    "org.joda.time.field.TestFieldUtils::testSafeSubtractLong",
]
# unrelated tests from the same suite that must not be selected
irrelevant_suite = [
    "org.joda.time.TestDateTime_Basics::testGetters",
    "org.joda.time.format.TestPeriodFormatter::testPrint",
    "org.joda.time.chrono.TestGJChronology::testFactory",
    "org.joda.time.TestPeriod_Constructors::testConstants",
]


def joda_suite():
    tests = [TestId(relevant_suite[0], Outcome.FAIL)]
    tests += [TestId(n) for n in relevant_suite[1:] + irrelevant_suite]
    random.Random(15).shuffle(tests)
    return tests


def test_joda_relevant_tests():
    """The failing test covers FieldUtils and IllegalFieldValueException."""
    tests = joda_suite()
    classes = {
        class_name_of("src/main/java/org/joda/time/field/FieldUtils.java"),
        class_name_of("src/main/java/org/joda/time/IllegalFieldValueException.java"),
    }
    assert classes == {"FieldUtils", "IllegalFieldValueException"}
    selected = select_relevant_tests(tests, classes)
    assert len(selected) == 13
    assert sorted(t.full_name for t in selected) == sorted(relevant_suite)
    assert sum(t.failing for t in selected) == 1


def test_joda_style_coverage_file(tmp_path):
    """A fixture with one failing and twelve relevant tests parses to |T| = 13."""
    fail = relevant_suite[0]
    data = {"tests": [
        {"name": fail, "outcome": "FAIL", "covered": [
            {"file": "src/main/java/org/joda/time/field/FieldUtils.java", "line": 139},
            {"file": "src/main/java/org/joda/time/IllegalFieldValueException.java", "line": 20}]},
    ] + [{"name": n, "outcome": "PASS", "covered": []} for n in relevant_suite[1:]]}
    m = parse_coverage(write_json(tmp_path, data))
    assert len(m.tests) == 13 and len(m.failing_tests) == 1
    assert covered_class_names(m) == {"FieldUtils", "IllegalFieldValueException"}


def test_empty_class_set_keeps_only_failing():
    tests = joda_suite()
    assert select_relevant_tests(tests, set()) == [t for t in tests if t.failing]


def test_substring_match():
    tests = [TestId("TestUtilsExtra::t"), TestId("Other::t"), TestId("X::f", Outcome.FAIL)]
    assert [t.full_name for t in select_relevant_tests(tests, {"Utils"})] == ["TestUtilsExtra::t", "X::f"]


names = st.text(alphabet="abcXYZ.:", min_size=1, max_size=8)


@given(st.lists(st.tuples(names, st.booleans()), max_size=20, unique_by=lambda x: x[0]),
       st.sets(st.text(alphabet="abcXYZ", max_size=3), max_size=4))
def test_relevant_selection_matches_brute_force(suite, classes):
    tests = [TestId(n, Outcome.FAIL if f else Outcome.PASS) for n, f in suite]
    selected = select_relevant_tests(tests, classes)
    expected = []
    for t in tests:
        hit = t.failing
        for c in classes:
            if c and any(t.full_name[i : i + len(c)] == c for i in range(len(t.full_name))):
                hit = True
        if hit:
            expected.append(t)
    assert selected == expected
    assert {t for t in tests if t.failing} <= set(selected) <= set(tests)


elements = st.builds(ElementId, st.sampled_from(["A.java", "b/B.java", "C.c"]), st.integers(1, 40))


@given(st.lists(st.tuples(st.booleans(), st.sets(elements, max_size=6)), min_size=1, max_size=6))
def test_coverage_round_trip(tmp_path_factory, rows):
    tests = [TestId(f"T::t{i}", Outcome.FAIL if f else Outcome.PASS) for i, (f, _) in enumerate(rows)]
    tests[0] = TestId("T::t0", Outcome.FAIL)
    m = CoverageMatrix.from_coverage(tests, {t.full_name: cov for t, (_, cov) in zip(tests, rows)})
    p = tmp_path_factory.mktemp("rt") / "c.json"
    write_coverage(m, p)
    assert parse_coverage(p) == m


def test_element_invariants():
    with pytest.raises(ValueError):
        ElementId("A", 0)
    with pytest.raises(ValueError):
        ElementId("A", 10, (1, 5))
    assert ElementId("A", 3, (1, 5)) == ElementId("A", 3)


def write_tsv(tmp_path, rows, name="evolve.tsv"):
    p = tmp_path / name
    p.write_text("file\tline\tcommit_hash\tepoch_seconds\torder_index\n"
                 + "".join("\t".join(map(str, r)) + "\n" for r in rows))
    return p


def test_parse_evolve_sorts_newest_first(tmp_path):
    p = write_tsv(tmp_path, [("A", 1, "c2", 10, 1), ("A", 1, "c1", 30, 0)])
    rel = parse_evolve(p)
    assert [c.hash for c in rel.history[ElementId("A", 1)]] == ["c1", "c2"]


def test_parse_evolve_empty_file(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("")
    assert parse_evolve(p).history == {}


def test_parse_evolve_missing_timestamp(tmp_path):
    p = write_tsv(tmp_path, [("A", 1, "c1", "", 0)])
    with pytest.raises(FormatError, match="line 2"):
        parse_evolve(p)


def test_parse_evolve_requires_header(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("A\t1\tc1\t10\t0\n")
    with pytest.raises(FormatError, match="header"):
        parse_evolve(p)


def test_equal_timestamps_use_order_index_and_round_trip(tmp_path):
    rows = [("A", 1, f"c{k}", 100, k) for k in range(6)] + [("B", 2, f"c{k}", 100, k) for k in (1, 4)]
    expected = None
    for seed in range(5):
        shuffled = rows[:]
        random.Random(seed).shuffle(shuffled)
        rel = parse_evolve(write_tsv(tmp_path, shuffled, f"s{seed}.tsv"))
        out = tmp_path / f"o{seed}.tsv"
        write_evolve(rel, out)
        text = out.read_text()
        expected = expected or text
        assert text == expected
        assert parse_evolve(out) == rel
    assert [c.hash for c in rel.history[ElementId("A", 1)]] == [f"c{k}" for k in range(6)]


@given(st.dictionaries(elements, st.lists(st.integers(0, 30), unique=True, max_size=8), max_size=5))
def test_evolve_lists_strictly_descending(hist):
    commits = {k: CommitId(f"h{k}", 1000 - 10 * (k // 3), k) for k in range(31)}
    rel = EvolveRelation({e: [commits[k] for k in ks] for e, ks in hist.items()})
    for lst in rel.history.values():
        for a, b in zip(lst, lst[1:]):
            assert (a.time, -a.order_index) > (b.time, -b.order_index)


def test_evolve_rejects_duplicate_commits():
    c = CommitId("h", 1, 0)
    with pytest.raises(ValidationError):
        EvolveRelation({ElementId("A", 1): [c, c]})
