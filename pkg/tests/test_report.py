import csv
import io
import json

import numpy as np
import pytest

from errcons import consistency as C
from errcons import report
from errcons.core import UNDEFINED, BinQuantiles, GridSpec, PercentileTable
from errcons.errors import DataError, InvariantViolation, TableMismatchError, UnknownObserverError
from errcons.ingest import RawTrialRow
from errcons.nullsim import run_simulation

from conftest import outcomes_from_rows


def cue_conflict_like():
    """Two humans and one model, 8000 trials, every accuracy exactly 0.5.

    Counts of the (h1, h2, m) correctness patterns are chosen so that the
    human pair agrees on 2 * (1467 + 1195) = 5324 trials (kappa .331) and
    each human-model pair on 2 * (1467 + 669) = 4272 trials (kappa .068).
    """
    a, b, g, d = 1467, 1195, 669, 669
    patterns = {
        (1, 1, 1): a, (0, 0, 0): a,
        (1, 1, 0): b, (0, 0, 1): b,
        (1, 0, 0): g, (0, 1, 1): g,
        (0, 1, 0): d, (1, 0, 1): d,
    }
    cols = [p for p, count in sorted(patterns.items()) for _ in range(count)]
    rows = np.array(cols, dtype=bool).T
    out = outcomes_from_rows(rows, ["h1", "h2", "m1"])
    return out, {"h1": "human", "h2": "human", "m1": "model"}


def test_cue_conflict_fixture_reproduces_group_means():
    out, groups = cue_conflict_like()
    assert out.n == 8000
    assert [r.accuracy for r in report.accuracy_table(out)] == [0.5, 0.5, 0.5]
    pts = report.scatter_report(C.pairwise_matrix(out), groups)
    summ = report.group_summary(pts)
    assert summ["human–human"].mean_kappa == pytest.approx(0.331, abs=1e-12)
    assert summ["human–model"].mean_kappa == pytest.approx(0.068, abs=1e-12)
    assert summ["human–model"].count == 2
    assert summ["human–model"].ci.width == pytest.approx(0.0, abs=1e-12)
    assert summ["human–human"].insufficient


def test_scatter_groups_combinatorics(rng):
    out = outcomes_from_rows(rng.random((5, 60)) < 0.6, ["h1", "h2", "h3", "m1", "m2"])
    groups = {"h1": "human", "h2": "human", "h3": "human", "m1": "model", "m2": "model"}
    pts = report.scatter_report(C.pairwise_matrix(out), groups)
    assert len(pts) == 10
    counts = {}
    for p in pts:
        counts[p.group] = counts.get(p.group, 0) + 1
        assert p.band is None
    assert counts == {"human–human": 3, "model–model": 1, "human–model": 6}


def test_identical_rows_on_diagonal():
    row = [1, 0, 1, 1, 0, 1]
    pts = report.scatter_report(C.pairwise_matrix(outcomes_from_rows([row, row])), {"o0": "x", "o1": "x"})
    assert pts[0].c_obs == 1.0 and pts[0].kappa == 1.0


def test_scatter_requires_groups_and_matching_table(rng):
    out = outcomes_from_rows(rng.random((3, 20)) < 0.5)
    m = C.pairwise_matrix(out)
    with pytest.raises(DataError, match="o2"):
        report.scatter_report(m, {"o0": "a", "o1": "a"})
    t = run_simulation(GridSpec(n_trials=21, axis_points=20, reps_per_cell=2), min_population=10)
    with pytest.raises(TableMismatchError):
        report.scatter_report(m, {"o0": "a", "o1": "a", "o2": "b"}, t)


def test_scatter_bands_from_table(rng):
    out = outcomes_from_rows(rng.random((4, 160)) < 0.55)
    t = run_simulation(GridSpec(n_trials=160, axis_points=200, reps_per_cell=5, seed=1))
    pts = report.scatter_report(C.pairwise_matrix(out), {o: "g" for o in out.observers}, t)
    for p in pts:
        k = int(p.c_exp * 100)
        q = t.kappa[k]
        if q.empty:
            assert p.band is None
        else:
            assert tuple(p.band) == (q.q_lo, q.q_hi)
    assert any(p.band is not None for p in pts)


def test_infeasible_point_is_an_invariant_violation():
    from errcons.core import ConsistencyResult
    from errcons.consistency import PairwiseMatrix

    bad = ConsistencyResult(("a", "b"), 10, 0, 9, 9, 0.0, 0.82, C.kappa(0.0, 0.82))
    diag = ConsistencyResult(("a", "a"), 10, 10, 9, 9, 1.0, 0.82, 1.0)
    m = PairwiseMatrix(("a", "b"), ((diag, bad), (bad.swapped(), diag)))
    with pytest.raises(InvariantViolation):
        report.scatter_report(m, {"a": "x", "b": "x"})


def test_group_summary_independence_and_undefined():
    def pt(a, b, g, k):
        return report.ScatterPoint((a, b), g, 10, 0.5, 0.5, k)

    pts = [pt("a", "b", "x", 0.1), pt("a", "c", "x", 0.3), pt("d", "e", "y", 0.2), pt("d", "f", "y", 0.4),
           pt("e", "f", "y", UNDEFINED)]
    full = report.group_summary(pts)
    assert full["y"].excluded_undefined == 1 and full["y"].count == 2
    fewer = report.group_summary(pts[1:])
    assert fewer["y"] == full["y"] and fewer["x"] != full["x"]
    same = report.group_summary([pt("a", "b", "z", 0.25), pt("a", "c", "z", 0.25)])
    assert tuple(same["z"].ci) == (0.25, 0.25)


def test_confusion():
    rows = [RawTrialRow("o", f"t{k}", c, c) for k, c in enumerate(["cat", "dog", "dog", "knife"])]
    cm = report.confusion(rows, "o")
    assert cm.categories == ("cat", "dog", "knife")
    np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 1]))
    rows.append(RawTrialRow("o", "t9", "dog", "cat"))
    cm = report.confusion(rows, "o", "row")
    assert cm.counts[1, 0] == 1
    np.testing.assert_allclose(cm.values.sum(axis=1), 1.0, atol=1e-9)
    cm = report.confusion(rows, "o", "row", categories=["cat", "dog", "knife", "zebra"])
    assert cm.values[3].sum() == 0.0
    with pytest.raises(UnknownObserverError):
        report.confusion(rows, "p")
    with pytest.raises(DataError):
        report.confusion([RawTrialRow("o", "t", is_correct=True)], "o")


def test_accuracy_table_fixture():
    # 883/1280, 142/160 and 128/160 round to 0.69, 0.89 and 0.80
    out = outcomes_from_rows([[1] * 883 + [0] * 397], ["subject-01"])
    assert round(report.accuracy_table(out)[0].accuracy, 2) == 0.69
    for correct, expected in ((142, 0.89), (128, 0.80), (160, 1.0), (120, 0.75)):
        out = outcomes_from_rows([[1] * correct + [0] * (160 - correct)])
        row = report.accuracy_table(out)[0]
        assert row.n == 160 and round(row.accuracy, 2) == expected
    text = report.accuracy_csv(report.accuracy_table(outcomes_from_rows([[1] * 883 + [0] * 397], ["s01"])))
    assert text.splitlines()[1] == "s01,883,1280,0.689844"


def test_fmt():
    assert report.fmt(0.1 + 0.2) == "0.3"
    assert report.fmt(-0.0) == "0"
    assert report.fmt(1 / 3) == "0.333333"
    assert report.fmt(1234567.0) == "1.23457e+06"
    assert report.fmt(None) == ""
    assert report.fmt(UNDEFINED) == "undefined"


def test_writers_are_stable(tmp_path):
    out, groups = cue_conflict_like()
    pts = report.scatter_report(C.pairwise_matrix(out), groups)
    a = report.scatter_csv(pts)
    assert a == report.scatter_csv(list(pts))
    rows = list(csv.reader(io.StringIO(a)))
    assert rows[0] == report.SCATTER_HEADER
    assert rows[1] == ["h1", "h2", "human–human", "8000", "0.5", "0.6655", "0.331", "", ""]
    s = report.summary_json(report.group_summary(pts))
    d = json.loads(s)
    assert list(d) == sorted(d)
    assert set(d["human–model"]) == {"mean_kappa", "ci_lo", "ci_hi", "count", "excluded_undefined"}
    assert d["human–human"]["ci_lo"] is None
    report.write_summary_json(report.group_summary(pts), tmp_path / "s.json")
    assert (tmp_path / "s.json").read_text(encoding="utf-8") == s


def test_table_file_roundtrip(tmp_path):
    t = run_simulation(GridSpec(n_trials=160, axis_points=100, reps_per_cell=3, seed=8), min_population=500)
    text = report.table_text(t)
    assert text.startswith(report.TABLE_MAGIC)
    assert "bin_lo,bin_hi,stat,count,dropped,q_lo,q_hi" in text
    assert report.parse_table(text) == t
    p = tmp_path / "t.csv"
    report.write_table(t, p)
    assert report.read_table(p) == t
    assert p.read_text(encoding="utf-8") == text


def test_table_file_errors():
    spec = GridSpec(n_trials=4, axis_points=3)
    t = PercentileTable(4, spec, [BinQuantiles(0, 0, None, None)] * 2, [BinQuantiles(0, 0, None, None)] * 2)
    text = report.table_text(t)
    with pytest.raises(DataError, match="not a percentile table"):
        report.parse_table("hello\n")
    with pytest.raises(DataError, match="malformed table row"):
        report.parse_table(text.replace(",cobs,", ",kapa,", 1))
    with pytest.raises(DataError, match="inconsistent"):
        report.parse_table(text.replace('"n_trials": 4', '"n_trials": 5'))
    with pytest.raises(DataError, match="missing bins"):
        report.parse_table(text.rsplit("\n", 2)[0] + "\n")
