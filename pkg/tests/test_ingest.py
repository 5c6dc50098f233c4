import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from errcons import ingest
from errcons.errors import (
    DataError,
    DuplicateRecordError,
    EmptyInputError,
    IncompleteTrialsError,
    InsufficientDataError,
    ParseError,
)
from errcons.ingest import RawTrialRow


def parse(text, profile=ingest.CANONICAL):
    return ingest.parse_responses(text.encode(), profile)


def test_parse_flag_row():
    rows = parse("observer_id,trial_id,is_correct\nh1,t1,true\n")
    assert len(rows) == 1 and rows[0].is_correct is True
    assert (rows[0].observer_id, rows[0].trial_id, rows[0].line) == ("h1", "t1", 2)


def test_parse_category_row():
    rows = parse("observer_id,trial_id,expected,response\nm1,t9,dog,cat\n")
    assert rows[0].is_correct is None
    assert ingest.derive_correctness(rows[0]) is False


def test_duplicate_names_both_lines():
    text = "observer_id,trial_id,is_correct\nh1,t1,true\nh1,t2,false\nh1,t1,false\n"
    with pytest.raises(DuplicateRecordError) as ei:
        parse(text)
    msg = str(ei.value)
    assert "line 2" in msg and ":4" in msg


def test_crlf_bom_and_metadata():
    text = "﻿observer_id,trial_id,is_correct,session\r\nh1,t1,1,a\r\nh1,t2,0,b\r\n"
    rows = parse(text)
    assert [r.is_correct for r in rows] == [True, False]
    assert rows[1].metadata == {"session": "b"}


def test_missing_columns():
    with pytest.raises(ParseError, match="missing mandatory"):
        parse("observer_id,is_correct\nh1,true\n")
    with pytest.raises(ParseError, match="is_correct or expected"):
        parse("observer_id,trial_id,response\nh1,t1,cat\n")
    with pytest.raises(ParseError, match="header"):
        parse("")


def test_malformed_rows_collected_with_line_numbers():
    text = "observer_id,trial_id,is_correct\nh1,t1,maybe\nh1,t2\nh1,t3,true\n,t4,true\n"
    with pytest.raises(ParseError) as ei:
        parse(text)
    lines = [line for _, line, _ in ei.value.problems]
    assert lines == [2, 3, 5]


def test_blank_flag_falls_back_to_categories():
    text = "observer_id,trial_id,is_correct,expected,response\nh1,t1,,dog,dog\nh1,t2,false,dog,dog\n"
    rows = parse(text)
    assert [ingest.derive_correctness(r) for r in rows] == [True, False]


def test_invalid_utf8():
    with pytest.raises(ParseError, match="UTF-8"):
        ingest.parse_responses(b"observer_id,trial_id,is_correct\n\xff,t,true\n")


def test_sources(tmp_path):
    text = "observer_id,trial_id,is_correct\nh1,t1,true\n"
    p = tmp_path / "a.csv"
    p.write_text(text)
    for src in (p, str(p), io.StringIO(text), io.BytesIO(text.encode()), text.encode()):
        assert len(ingest.parse_responses(src)) == 1
    assert ingest.parse_responses(p)[0].source == str(p)


def test_published_profile():
    text = ("subj,session,trial,rt,object_response,category,condition,imagename\n"
            "subject-01,1,1,900,knife,knife,0,0001_cl_s01_cl_knife_10-dog.png\n"
            "subject-01,1,2,700,na,dog,0,0002_cl_s01_cl_dog_3-cat.png\n")
    rows = ingest.parse_responses(text.encode(), ingest.PUBLISHED_BEHAVIORAL)
    assert [ingest.derive_correctness(r) for r in rows] == [True, False]
    assert rows[0].metadata["condition"] == "0"
    assert rows[0].trial_id == "0001_cl_s01_cl_knife_10-dog.png"


def test_trial_id_pattern_and_mapping_file(tmp_path):
    m = {"observer_id": "subj", "trial_id": "imagename", "is_correct": None,
         "expected": "category", "response": "object_response", "trial_id_pattern": r"_(\d+-\w+)\.png$"}
    path = tmp_path / "map.json"
    path.write_text(json.dumps(m))
    mapping = ingest.ColumnMapping.load(path)
    text = "subj,imagename,category,object_response\ns1,0001_cl_s01_cl_knife_10-dog.png,knife,knife\n"
    rows = ingest.parse_responses(text.encode(), mapping)
    assert rows[0].trial_id == "10-dog"
    with pytest.raises(DataError, match="unknown column-mapping"):
        ingest.ColumnMapping.from_dict({"subject": "x"})


def test_derive_correctness_modes():
    r = RawTrialRow("o", "t", "dog", "cat", True)
    assert ingest.derive_correctness(r) is True
    assert ingest.derive_correctness(RawTrialRow("o", "t", "dog", "dog")) is True
    assert ingest.derive_correctness(RawTrialRow("o", "t", " dog", "dog ")) is True
    r = RawTrialRow("o", "t", "Dog", "dog")
    assert ingest.derive_correctness(r, ingest.STRICT) is False
    assert ingest.derive_correctness(r, ingest.CASE_INSENSITIVE) is True
    with pytest.raises(DataError):
        RawTrialRow("o", "t", "dog")


def _rows(n_trials, observers=("A", "B"), rng=None, skip=None):
    rng = rng or np.random.default_rng(0)
    rows = []
    for o in observers:
        for t in range(n_trials):
            if skip and (o, t) in skip:
                continue
            rows.append(RawTrialRow(o, f"t{t:03d}", is_correct=bool(rng.random() < 0.7)))
    return rows


def test_align_complete():
    out = ingest.align(_rows(160))
    assert out.outcomes.shape == (2, 160)


def test_align_missing_trial():
    rows = _rows(160, skip={("B", 42)})
    with pytest.raises(IncompleteTrialsError) as ei:
        ingest.align(rows)
    assert ei.value.observer == "B" and ei.value.trial == "t042"
    assert "t042" in str(ei.value)
    out, report = ingest.align_detailed(rows, ingest.INTERSECT)
    assert out.outcomes.shape == (2, 159) and "t042" not in out.trials
    assert report.dropped == {"A": 1, "B": 0} and report.kept_trials == 159


def test_align_errors():
    with pytest.raises(InsufficientDataError):
        ingest.align(_rows(5, observers=("A",)))
    rows = [RawTrialRow("A", "t1", is_correct=True), RawTrialRow("B", "t2", is_correct=True)]
    with pytest.raises(EmptyInputError):
        ingest.align(rows, ingest.INTERSECT)


def test_na_responses_reported():
    rows = [RawTrialRow("A", "t1", "dog", "na"), RawTrialRow("A", "t2", "cat", "cat"),
            RawTrialRow("B", "t1", "dog", "dog"), RawTrialRow("B", "t2", "cat", "dog")]
    out, report = ingest.align_detailed(rows)
    assert report.to_dict()["na_responses_counted_incorrect"] == {"A": 1, "B": 0}
    assert out.row("A").tolist() == [False, True]


def test_merge_rows_cross_file_duplicates():
    a = parse("observer_id,trial_id,is_correct\nh1,t1,true\n")
    b = parse("observer_id,trial_id,is_correct\nh2,t1,true\nh1,t1,false\n")
    with pytest.raises(DuplicateRecordError):
        ingest.merge_rows([a, b])


@given(st.integers(1, 30), st.integers(2, 5), st.randoms())
def test_align_idempotent_order_independent_roundtrip(n, k, rnd):
    rng = np.random.default_rng(rnd.getrandbits(32))
    rows = _rows(n, observers=tuple(f"obs{i}" for i in range(k)), rng=rng)
    out = ingest.align(rows)
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    assert ingest.align(shuffled) == out
    buf = io.StringIO()
    ingest.write_canonical_csv(out, buf)
    again = ingest.align(ingest.parse_responses(buf.getvalue().encode()))
    assert again == out
    assert ingest.align(shuffled, ingest.INTERSECT) == out


def test_load_groups(tmp_path):
    p = tmp_path / "g.json"
    p.write_text('{"h1": "human", "m1": "model"}')
    assert ingest.load_groups(p) == {"h1": "human", "m1": "model"}
    p.write_text('["h1"]')
    with pytest.raises(DataError):
        ingest.load_groups(p)
    p.write_text('{')
    with pytest.raises(DataError):
        ingest.load_groups(p)
