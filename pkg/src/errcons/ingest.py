"""Load per-trial responses, derive correctness and align observers.

Two input layouts are understood:

* canonical CSV with ``observer_id,trial_id,is_correct`` or
  ``observer_id,trial_id,expected,response`` columns;
* any other layout through a :class:`ColumnMapping`, e.g. the published
  behavioural CSVs (``subj``, ``imagename``, ``category``,
  ``object_response``, ...).
"""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import AlignedOutcomes, ResponseRecord
from .errors import (
    DataError,
    DuplicateRecordError,
    EmptyInputError,
    IncompleteTrialsError,
    InsufficientDataError,
    ParseError,
)

STRICT = "strict"
CASE_INSENSITIVE = "case-insensitive"
REQUIRE_COMPLETE = "require-complete"
INTERSECT = "intersect"

_TRUE = {"true", "1"}
_FALSE = {"false", "0"}


@dataclass(frozen=True)
class RawTrialRow:
    observer_id: str
    trial_id: str
    expected: str | None = None
    response: str | None = None
    is_correct: bool | None = None
    source: str = "<input>"
    line: int = 0
    metadata: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.is_correct is None and (self.expected is None or self.response is None):
            raise DataError(
                f"{self.source}:{self.line}: row needs is_correct or both expected and response"
            )


@dataclass(frozen=True)
class ColumnMapping:
    """Which input columns feed which :class:`RawTrialRow` fields.

    ``trial_id_pattern`` is an optional regular expression applied to the
    trial column; its first group (or whole match) becomes the trial id.
    """

    observer_id: str = "observer_id"
    trial_id: str = "trial_id"
    is_correct: str | None = "is_correct"
    expected: str | None = "expected"
    response: str | None = "response"
    trial_id_pattern: str | None = None
    name: str = "custom"

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnMapping":
        known = {"observer_id", "trial_id", "is_correct", "expected", "response", "trial_id_pattern", "name"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown column-mapping keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ColumnMapping":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid column-mapping JSON ({exc})") from None

    def to_dict(self):
        return {
            "observer_id": self.observer_id,
            "trial_id": self.trial_id,
            "is_correct": self.is_correct,
            "expected": self.expected,
            "response": self.response,
            "trial_id_pattern": self.trial_id_pattern,
            "name": self.name,
        }


CANONICAL = ColumnMapping(name="canonical")
PUBLISHED_BEHAVIORAL = ColumnMapping(
    observer_id="subj",
    trial_id="imagename",
    is_correct=None,
    expected="category",
    response="object_response",
    name="published-behavioral",
)
PROFILES = {"canonical": CANONICAL, "published-behavioral": PUBLISHED_BEHAVIORAL}


def _parse_bool(text):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _open_text(source):
    """Return ``(text stream, display name, needs_close)``."""
    if isinstance(source, (str, Path)):
        return open(source, encoding="utf-8", newline=""), str(source), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), "<bytes>", False
    if isinstance(source, io.TextIOBase):
        return source, getattr(source, "name", "<stream>"), False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), getattr(source, "name", "<stream>"), False


def parse_responses(source, profile: ColumnMapping = CANONICAL, name: str | None = None) -> list[RawTrialRow]:
    """Parse one CSV into rows; problems are collected and raised together.

    Columns not consumed by ``profile`` are kept in ``row.metadata``.
    """
    try:
        stream, display, close = _open_text(source)
    except UnicodeDecodeError as exc:
        raise ParseError([(name or "<bytes>", 0, f"not valid UTF-8 ({exc})")]) from None
    display = name or display
    try:
        try:
            reader = csv.reader(stream)
            header = next(reader, None)
            if header is None:
                raise ParseError([(display, 0, "empty file: header row missing")])
            header = [h.strip() for h in header]
            if header and header[0].startswith("﻿"):
                header[0] = header[0][1:]
            records = list(enumerate(reader, start=2))
        except UnicodeDecodeError as exc:
            raise ParseError([(display, 0, f"not valid UTF-8 ({exc})")]) from None
    finally:
        if close:
            stream.close()

    col = {h: k for k, h in enumerate(header)}
    missing = [c for c in (profile.observer_id, profile.trial_id) if c not in col]
    has_flag = profile.is_correct is not None and profile.is_correct in col
    has_pair = all(c is not None and c in col for c in (profile.expected, profile.response))
    if not (has_flag or has_pair):
        options = []
        if profile.is_correct:
            options.append(profile.is_correct)
        if profile.expected and profile.response:
            options.append(f"{profile.expected}+{profile.response}")
        missing.append(" or ".join(options) or "a correctness column")
    if missing:
        raise ParseError([(display, 1, f"missing mandatory column(s): {', '.join(missing)}")])

    used = {profile.observer_id, profile.trial_id}
    if has_flag:
        used.add(profile.is_correct)
    if has_pair:
        used.update((profile.expected, profile.response))
    pattern = re.compile(profile.trial_id_pattern) if profile.trial_id_pattern else None

    rows, problems = [], []
    seen: dict[tuple[str, str], int] = {}
    duplicates = []
    for line, fields in records:
        if not fields or all(f.strip() == "" for f in fields):
            continue
        if len(fields) != len(header):
            problems.append((display, line, f"expected {len(header)} fields, found {len(fields)}"))
            continue
        get = lambda c: fields[col[c]]  # noqa: E731
        observer = get(profile.observer_id).strip()
        trial = get(profile.trial_id).strip()
        if pattern is not None:
            m = pattern.search(trial)
            if m is None:
                problems.append((display, line, f"trial id {trial!r} does not match {profile.trial_id_pattern!r}"))
                continue
            trial = m.group(1) if m.groups() else m.group(0)
        if not observer or not trial:
            problems.append((display, line, "empty observer or trial id"))
            continue
        flag = None
        if has_flag and get(profile.is_correct).strip() != "":
            try:
                flag = _parse_bool(get(profile.is_correct))
            except ValueError as exc:
                problems.append((display, line, str(exc)))
                continue
        expected = get(profile.expected) if has_pair else None
        response = get(profile.response) if has_pair else None
        if flag is None and (expected is None or response is None):
            problems.append((display, line, "no correctness information"))
            continue
        key = (observer, trial)
        if key in seen:
            duplicates.append((display, line, f"duplicate record for ({observer}, {trial}); first seen on line {seen[key]}"))
            continue
        seen[key] = line
        meta = {h: fields[k] for h, k in col.items() if h not in used}
        rows.append(RawTrialRow(observer, trial, expected, response, flag, display, line, meta))
    if problems:
        raise ParseError(problems + duplicates)
    if duplicates:
        raise DuplicateRecordError(duplicates)
    return rows


def merge_rows(row_lists: Iterable[Sequence[RawTrialRow]]) -> list[RawTrialRow]:
    """Concatenate rows from several files, rejecting cross-file duplicates."""
    merged, seen, duplicates = [], {}, []
    for rows in row_lists:
        for row in rows:
            key = (row.observer_id, row.trial_id)
            if key in seen:
                first = seen[key]
                duplicates.append(
                    (row.source, row.line,
                     f"duplicate record for ({key[0]}, {key[1]}); first seen at {first.source}:{first.line}")
                )
                continue
            seen[key] = row
            merged.append(row)
    if duplicates:
        raise DuplicateRecordError(duplicates)
    return merged


def derive_correctness(row: RawTrialRow, mode: str = STRICT) -> bool:
    """An explicit ``is_correct`` wins; otherwise compare the trimmed categories."""
    if row.is_correct is not None:
        return row.is_correct
    if row.expected is None or row.response is None:
        raise DataError(f"{row.source}:{row.line}: no correctness information")
    a, b = row.expected.strip(), row.response.strip()
    if mode == STRICT:
        return a == b
    if mode == CASE_INSENSITIVE:
        return a.casefold() == b.casefold()
    raise ValueError(f"unknown comparison mode {mode!r}")


@dataclass(frozen=True)
class AlignmentReport:
    policy: str
    kept_trials: int
    dropped: Mapping[str, int]
    na_responses: Mapping[str, int]

    def to_dict(self):
        return {
            "policy": self.policy,
            "kept_trials": self.kept_trials,
            "dropped_trials": dict(sorted(self.dropped.items())),
            "na_responses_counted_incorrect": dict(sorted(self.na_responses.items())),
        }


def align_detailed(rows: Sequence[RawTrialRow], policy: str = REQUIRE_COMPLETE,
                   mode: str = STRICT) -> tuple[AlignedOutcomes, AlignmentReport]:
    if policy not in (REQUIRE_COMPLETE, INTERSECT):
        raise ValueError(f"unknown alignment policy {policy!r}")
    by_observer: dict[str, dict[str, bool]] = {}
    na = {}
    for row in rows:
        trials = by_observer.setdefault(row.observer_id, {})
        if row.trial_id in trials:
            raise DuplicateRecordError([(row.source, row.line, f"duplicate record for ({row.observer_id}, {row.trial_id})")])
        trials[row.trial_id] = derive_correctness(row, mode)
        if row.is_correct is None and row.response is not None and row.response.strip().lower() == "na":
            na[row.observer_id] = na.get(row.observer_id, 0) + 1
    if len(by_observer) < 2:
        raise InsufficientDataError(f"alignment needs at least two observers, found {len(by_observer)}")
    observers = sorted(by_observer)
    all_trials = set().union(*(set(t) for t in by_observer.values()))
    if policy == REQUIRE_COMPLETE:
        for o in observers:
            missing = sorted(all_trials - set(by_observer[o]))
            if missing:
                extra = f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""
                raise IncompleteTrialsError(
                    o, missing[0], f"observer {o!r} has no response for trial {missing[0]!r}{extra}"
                )
        shared = all_trials
    else:
        shared = set.intersection(*(set(t) for t in by_observer.values()))
        if not shared:
            raise EmptyInputError("observers share no trials")
    trials = sorted(shared)
    records = [ResponseRecord(o, t, by_observer[o][t]) for o in observers for t in trials]
    outcomes = AlignedOutcomes.from_records(records)
    dropped = {o: len(by_observer[o]) - len(trials) for o in observers}
    return outcomes, AlignmentReport(policy, len(trials), dropped, {o: na.get(o, 0) for o in observers})


def align(rows: Sequence[RawTrialRow], policy: str = REQUIRE_COMPLETE, mode: str = STRICT) -> AlignedOutcomes:
    return align_detailed(rows, policy, mode)[0]


def write_canonical_csv(outcomes: AlignedOutcomes, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["observer_id", "trial_id", "is_correct"])
    for r, o in enumerate(outcomes.observers):
        for c, t in enumerate(outcomes.trials):
            w.writerow([o, t, "true" if outcomes.outcomes[r, c] else "false"])


def load_groups(path) -> dict[str, str]:
    """Observer -> group label map from a JSON object."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid groups JSON ({exc})") from None
    if not isinstance(data, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
        raise DataError(f"{path}: groups file must map observer ids to label strings")
    return data
