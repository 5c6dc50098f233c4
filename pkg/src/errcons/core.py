"""Domain types shared across the package.

Every type is immutable after construction and round-trips through
``to_dict``/``from_dict`` (plain JSON-compatible structures).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import AlignmentError, DataError, EmptyInputError, IncompleteTrialsError, SpecError

ObserverId = str


class Undefined(enum.Enum):
    """Marker for kappa when chance agreement equals one (0/0)."""

    UNDEFINED = "undefined"

    def __repr__(self):
        return "UNDEFINED"

    def __str__(self):
        return "undefined"


UNDEFINED = Undefined.UNDEFINED
Kappa = Union[float, Undefined]


def kappa_to_json(value: Kappa):
    return "undefined" if value is UNDEFINED else value


def kappa_from_json(value) -> Kappa:
    return UNDEFINED if value == "undefined" else float(value)


def _check_id(value, what):
    if not isinstance(value, str) or value == "":
        raise DataError(f"{what} must be a non-empty string, got {value!r}")


@dataclass(frozen=True)
class ResponseRecord:
    observer: ObserverId
    trial: str
    is_correct: bool

    def __post_init__(self):
        _check_id(self.observer, "observer id")
        _check_id(self.trial, "trial id")
        object.__setattr__(self, "is_correct", bool(self.is_correct))

    def to_dict(self):
        return {"observer": self.observer, "trial": self.trial, "is_correct": self.is_correct}

    @classmethod
    def from_dict(cls, d):
        return cls(d["observer"], d["trial"], d["is_correct"])


@dataclass(frozen=True, eq=False)
class AlignedOutcomes:
    """Boolean outcome matrix, one row per observer and one column per trial.

    ``outcomes[r, t]`` is True when observer ``observers[r]`` answered trial
    ``trials[t]`` correctly. The array is stored read-only.
    """

    observers: tuple[ObserverId, ...]
    trials: tuple[str, ...]
    outcomes: np.ndarray

    def __post_init__(self):
        observers = tuple(self.observers)
        trials = tuple(self.trials)
        arr = np.array(self.outcomes, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape != (len(observers), len(trials)):
            raise AlignmentError(
                f"outcome matrix shape {arr.shape} does not match "
                f"{len(observers)} observers x {len(trials)} trials"
            )
        if len(trials) < 1:
            raise EmptyInputError("aligned outcomes need at least one trial")
        if len(observers) < 1:
            raise EmptyInputError("aligned outcomes need at least one observer")
        for o in observers:
            _check_id(o, "observer id")
        for t in trials:
            _check_id(t, "trial id")
        if len(set(observers)) != len(observers):
            raise DataError("duplicate observer ids")
        if len(set(trials)) != len(trials):
            raise DataError("duplicate trial ids")
        arr.setflags(write=False)
        object.__setattr__(self, "observers", observers)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "outcomes", arr)

    @property
    def n(self) -> int:
        return len(self.trials)

    def row(self, observer: ObserverId) -> np.ndarray:
        from .errors import UnknownObserverError

        try:
            return self.outcomes[self.observers.index(observer)]
        except ValueError:
            raise UnknownObserverError(f"unknown observer {observer!r}") from None

    @classmethod
    def from_records(cls, records: Iterable[ResponseRecord]) -> "AlignedOutcomes":
        """Build the canonical (lexicographically sorted) matrix.

        Every observer must have exactly one record for every trial seen.
        """
        cells = {}
        for rec in records:
            key = (rec.observer, rec.trial)
            if key in cells:
                raise DataError(f"duplicate record for observer {rec.observer!r}, trial {rec.trial!r}")
            cells[key] = rec.is_correct
        observers = sorted({o for o, _ in cells})
        trials = sorted({t for _, t in cells})
        if not trials:
            raise EmptyInputError("no records")
        arr = np.zeros((len(observers), len(trials)), dtype=bool)
        for r, o in enumerate(observers):
            for c, t in enumerate(trials):
                try:
                    arr[r, c] = cells[(o, t)]
                except KeyError:
                    raise IncompleteTrialsError(o, t) from None
        return cls(tuple(observers), tuple(trials), arr)

    def to_records(self) -> list[ResponseRecord]:
        return [
            ResponseRecord(o, t, bool(self.outcomes[r, c]))
            for r, o in enumerate(self.observers)
            for c, t in enumerate(self.trials)
        ]

    def __eq__(self, other):
        if not isinstance(other, AlignedOutcomes):
            return NotImplemented
        return (
            self.observers == other.observers
            and self.trials == other.trials
            and np.array_equal(self.outcomes, other.outcomes)
        )

    __hash__ = None

    def to_dict(self):
        return {
            "observers": list(self.observers),
            "trials": list(self.trials),
            "outcomes": ["".join("1" if x else "0" for x in row) for row in self.outcomes],
        }

    @classmethod
    def from_dict(cls, d):
        rows = [[ch == "1" for ch in row] for row in d["outcomes"]]
        arr = np.array(rows, dtype=bool).reshape(len(d["observers"]), len(d["trials"]))
        return cls(tuple(d["observers"]), tuple(d["trials"]), arr)


@dataclass(frozen=True)
class AccuracyPair:
    p_i: float
    p_j: float
    n: int

    def __post_init__(self):
        from .errors import DomainError

        for p in (self.p_i, self.p_j):
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"accuracy {p!r} outside [0, 1]")
        if self.n < 1:
            raise DomainError(f"trial count must be positive, got {self.n}")

    @property
    def c_exp(self) -> float:
        from .consistency import expected_overlap

        return expected_overlap(self.p_i, self.p_j)

    def to_dict(self):
        return {"p_i": self.p_i, "p_j": self.p_j, "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["p_i"]), float(d["p_j"]), int(d["n"]))


@dataclass(frozen=True)
class ConsistencyResult:
    """Error-consistency statistics for one observer pair.

    ``k_i`` and ``k_j`` are the correct-response counts; ``e`` counts trials
    where both observers were right or both were wrong.
    """

    pair: tuple[ObserverId, ObserverId]
    n: int
    e: int
    k_i: int
    k_j: int
    c_obs: float
    c_exp: float
    kappa: Kappa

    @property
    def p_i(self) -> float:
        return self.k_i / self.n

    @property
    def p_j(self) -> float:
        return self.k_j / self.n

    @property
    def is_self_pair(self) -> bool:
        return self.pair[0] == self.pair[1]

    @property
    def defined(self) -> bool:
        return self.kappa is not UNDEFINED

    @property
    def c_exp_exact(self) -> Fraction:
        """Chance agreement as an exact rational, used for bin assignment."""
        n = self.n
        return Fraction(self.k_i * self.k_j + (n - self.k_i) * (n - self.k_j), n * n)

    def swapped(self) -> "ConsistencyResult":
        return ConsistencyResult(
            (self.pair[1], self.pair[0]), self.n, self.e, self.k_j, self.k_i, self.c_obs, self.c_exp, self.kappa
        )

    def to_dict(self):
        return {
            "pair": list(self.pair),
            "n": self.n,
            "e": self.e,
            "k_i": self.k_i,
            "k_j": self.k_j,
            "c_obs": self.c_obs,
            "c_exp": self.c_exp,
            "kappa": kappa_to_json(self.kappa),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(d["pair"]),
            int(d["n"]),
            int(d["e"]),
            int(d["k_i"]),
            int(d["k_j"]),
            float(d["c_obs"]),
            float(d["c_exp"]),
            kappa_from_json(d["kappa"]),
        )


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __iter__(self):
        yield self.lo
        yield self.hi

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["lo"]), float(d["hi"]))


@dataclass(frozen=True)
class GridSpec:
    """Accuracy grid for the null-hypothesis simulation.

    ``tail_fraction`` of the axis points go into each tail
    ``[0, tail_width]`` and ``[1 - tail_width, 1]``; the default 0.33 puts
    66% of the points in the two 15% tails.
    """

    n_trials: int = 160
    axis_points: int = 4200
    reps_per_cell: int = 5
    tail_fraction: float = 0.33
    tail_width: float = 0.15
    seed: int = 0
    quantile_pair: tuple[float, float] = (0.025, 0.975)

    def __post_init__(self):
        object.__setattr__(self, "quantile_pair", tuple(float(q) for q in self.quantile_pair))
        for name in ("n_trials", "axis_points", "reps_per_cell"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise SpecError(f"{name} must be a positive integer, got {v!r}")
        if self.reps_per_cell >= 2**32:
            raise SpecError("reps_per_cell must fit in 32 bits")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise SpecError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not 0.0 < self.tail_width < 0.5:
            raise SpecError(f"tail_width must lie in (0, 0.5), got {self.tail_width!r}")
        if not 0.0 <= self.tail_fraction <= 0.5:
            raise SpecError(f"tail_fraction must lie in [0, 0.5], got {self.tail_fraction!r}")
        if len(self.quantile_pair) != 2:
            raise SpecError("quantile_pair needs exactly two probabilities")
        lo, hi = self.quantile_pair
        if not 0.0 <= lo <= hi <= 1.0:
            raise SpecError(f"quantile pair must satisfy 0 <= lo <= hi <= 1, got {self.quantile_pair}")
        if self.tail_points * 2 + self.middle_points != self.axis_points:
            raise SpecError("grid point counts do not add up")

    @property
    def tail_points(self) -> int:
        if self.axis_points < 10:
            return 0
        # two tails never take more than the whole axis
        return min(int(round(self.tail_fraction * self.axis_points)), self.axis_points // 2)

    @property
    def middle_points(self) -> int:
        return self.axis_points - 2 * self.tail_points

    @property
    def total_samples(self) -> int:
        return self.axis_points * self.axis_points * self.reps_per_cell

    @classmethod
    def preset(cls, name: str, **overrides) -> "GridSpec":
        presets = {"paper-160": dict(n_trials=160), "paper-1280": dict(n_trials=1280)}
        if name not in presets:
            raise SpecError(f"unknown preset {name!r}; choose from {sorted(presets)}")
        return cls(**{**presets[name], **overrides})

    def to_dict(self):
        return {
            "n_trials": int(self.n_trials),
            "axis_points": int(self.axis_points),
            "reps_per_cell": int(self.reps_per_cell),
            "tail_fraction": self.tail_fraction,
            "tail_width": self.tail_width,
            "seed": int(self.seed),
            "quantile_pair": list(self.quantile_pair),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            n_trials=int(d["n_trials"]),
            axis_points=int(d["axis_points"]),
            reps_per_cell=int(d["reps_per_cell"]),
            tail_fraction=float(d["tail_fraction"]),
            tail_width=float(d["tail_width"]),
            seed=int(d["seed"]),
            quantile_pair=tuple(float(q) for q in d["quantile_pair"]),
        )


@dataclass(frozen=True)
class BinQuantiles:
    """Null-distribution summary of one statistic inside one c_exp bin.

    ``count`` is the number of samples that entered the quantile computation
    and ``dropped`` the number of degenerate samples left out of it.
    ``q_lo``/``q_hi`` are None when the bin is under-populated.
    """

    count: int
    dropped: int
    q_lo: float | None
    q_hi: float | None

    def __post_init__(self):
        if (self.q_lo is None) != (self.q_hi is None):
            raise ValueError("q_lo and q_hi must both be set or both be None")
        if self.q_lo is not None and not self.q_lo <= self.q_hi:
            raise ValueError(f"q_lo {self.q_lo} > q_hi {self.q_hi}")

    @property
    def empty(self) -> bool:
        return self.q_lo is None

    def to_dict(self):
        return {"count": self.count, "dropped": self.dropped, "q_lo": self.q_lo, "q_hi": self.q_hi}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["count"]), int(d["dropped"]), d["q_lo"], d["q_hi"])


STATS = ("cobs", "kappa")


@dataclass(frozen=True)
class PercentileTable:
    """Binned null-distribution quantiles of c_obs and kappa over c_exp.

    Bin ``k`` covers ``[k * w, (k + 1) * w)``; the last bin is closed at 1.
    """

    n: int
    spec: GridSpec
    cobs: tuple[BinQuantiles, ...]
    kappa: tuple[BinQuantiles, ...]
    min_population: int = 1000
    samples: int = 0
    degenerate: int = 0
    kappa_cexp_corr: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cobs", tuple(self.cobs))
        object.__setattr__(self, "kappa", tuple(self.kappa))
        if len(self.cobs) != len(self.kappa) or not self.cobs:
            raise ValueError("cobs and kappa must have the same, non-zero number of bins")
        if self.n != self.spec.n_trials:
            raise ValueError("table n disagrees with its grid spec")

    @property
    def nbins(self) -> int:
        return len(self.cobs)

    @property
    def bin_width(self) -> float:
        return 1.0 / self.nbins

    def bin_edges(self, k: int) -> tuple[float, float]:
        return k / self.nbins, (k + 1) / self.nbins

    def stat(self, name: str) -> tuple[BinQuantiles, ...]:
        if name not in STATS:
            raise KeyError(name)
        return getattr(self, name)

    def to_dict(self):
        return {
            "n": self.n,
            "spec": self.spec.to_dict(),
            "cobs": [b.to_dict() for b in self.cobs],
            "kappa": [b.to_dict() for b in self.kappa],
            "min_population": self.min_population,
            "samples": self.samples,
            "degenerate": self.degenerate,
            "kappa_cexp_corr": self.kappa_cexp_corr,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            n=int(d["n"]),
            spec=GridSpec.from_dict(d["spec"]),
            cobs=tuple(BinQuantiles.from_dict(b) for b in d["cobs"]),
            kappa=tuple(BinQuantiles.from_dict(b) for b in d["kappa"]),
            min_population=int(d["min_population"]),
            samples=int(d["samples"]),
            degenerate=int(d["degenerate"]),
            kappa_cexp_corr=d["kappa_cexp_corr"],
        )


def bin_index(c_exp, nbins: int = 100) -> int:
    """Bin holding ``c_exp`` under the ``[k/nbins, (k+1)/nbins)`` convention.

    Uses exact rational arithmetic so that values landing on an edge are
    never misassigned by rounding.
    """
    x = Fraction(c_exp)
    if not 0 <= x <= 1:
        from .errors import DomainError

        raise DomainError(f"c_exp {float(c_exp)!r} outside [0, 1]")
    return min(math.floor(x * nbins), nbins - 1)
