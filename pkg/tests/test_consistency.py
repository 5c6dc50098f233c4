import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from errcons import consistency as C
from errcons.core import UNDEFINED, Interval
from errcons.errors import (
    AlignmentError,
    DomainError,
    EmptyInputError,
    InsufficientDataError,
    UndefinedKappaError,
    UnknownObserverError,
)

from conftest import outcomes_from_rows

unit = st.floats(0.0, 1.0, allow_nan=False)
bool_pairs = st.integers(1, 64).flatmap(
    lambda n: st.tuples(st.lists(st.booleans(), min_size=n, max_size=n),
                        st.lists(st.booleans(), min_size=n, max_size=n))
)


# observed / expected overlap and kappa

def test_observed_overlap_examples(rng):
    a = rng.random(160) < 0.7
    assert C.observed_overlap(a, a) == 1.0
    assert C.observed_overlap(a, ~a) == 0.0
    b = a.copy()
    b[:40] = ~b[:40]
    assert C.observed_overlap(a, b) == 0.75


def test_observed_overlap_errors():
    with pytest.raises(AlignmentError):
        C.observed_overlap([True, False], [True])
    with pytest.raises(EmptyInputError):
        C.observed_overlap([], [])


def test_expected_overlap_examples():
    assert C.expected_overlap(1.0, 1.0) == 1.0
    for x in (0.0, 0.13, 0.5, 0.77, 1.0):
        assert C.expected_overlap(0.5, x) == pytest.approx(0.5, abs=1e-15)
    # 0.9*0.8 + 0.1*0.2 = 0.72 + 0.02
    assert C.expected_overlap(0.9, 0.8) == pytest.approx(0.74, abs=1e-15)
    with pytest.raises(DomainError):
        C.expected_overlap(1.1, 0.5)
    with pytest.raises(DomainError):
        C.expected_overlap(0.5, -0.01)


def test_kappa_examples():
    assert C.kappa(0.6, 0.6) == 0.0
    assert C.kappa(1.0, 0.74) == pytest.approx(1.0, abs=1e-15)
    # (0.9 - 0.74) / 0.26 = 0.16 / 0.26 = 8/13
    assert C.kappa(0.9, 0.74) == pytest.approx(8 / 13, abs=1e-14)
    assert C.kappa(0.3, 1.0) is UNDEFINED
    with pytest.raises(DomainError):
        C.kappa(1.2, 0.5)
    with pytest.raises(DomainError):
        C.kappa(0.5, float("nan"))


# pair_consistency and the matrix

def test_self_pair_and_half_agreement():
    a = np.array([1, 0, 1, 0, 1, 0, 1, 0], dtype=bool)
    b = np.array([1, 1, 0, 0, 1, 1, 0, 0], dtype=bool)
    out = outcomes_from_rows([a, b])
    r = C.pair_consistency(out, "o0", "o0")
    assert r.c_obs == 1.0 and r.kappa == 1.0 and r.is_self_pair
    r = C.pair_consistency(out, "o0", "o1")
    assert r.c_exp == 0.5 and r.c_obs == 0.5 and r.kappa == 0.0


def test_pair_consistency_matches_counts(rng):
    rows = rng.random((2, 160)) < 0.8
    r = C.pair_consistency(outcomes_from_rows(rows), "o0", "o1")
    e = sum(int(x == y) for x, y in zip(rows[0], rows[1]))
    pi, pj = rows[0].sum() / 160, rows[1].sum() / 160
    ce = pi * pj + (1 - pi) * (1 - pj)
    assert r.e == e
    assert r.kappa == pytest.approx((e / 160 - ce) / (1 - ce), abs=1e-12)


@pytest.mark.parametrize("value", [0, 1])
def test_degenerate_pair_is_undefined(value):
    out = outcomes_from_rows(np.full((2, 5), bool(value)))
    r = C.pair_consistency(out, "o0", "o1")
    assert r.kappa is UNDEFINED and not r.defined
    assert r.c_exp == 1.0 and r.c_obs == 1.0


def test_opposite_deterministic_observers_defined():
    out = outcomes_from_rows([[1, 1, 1], [0, 0, 0]])
    r = C.pair_consistency(out, "o0", "o1")
    assert r.c_exp == 0.0 and r.c_obs == 0.0 and r.kappa == 0.0


def test_unknown_observer():
    out = outcomes_from_rows([[1, 0], [0, 1]])
    with pytest.raises(UnknownObserverError, match="nobody"):
        C.pair_consistency(out, "o0", "nobody")


def test_pairwise_matrix(rng):
    k = 5
    out = outcomes_from_rows(rng.random((k, 40)) < 0.6)
    m = C.pairwise_matrix(out)
    assert len(m.unique_pairs()) == k * (k - 1) // 2
    assert len(m.unique_pairs(include_self=True)) == k * (k + 1) // 2
    K = m.kappa_array()
    np.testing.assert_array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)
    for a, b in combinations(out.observers, 2):
        assert m[a, b].c_obs == m[b, a].c_obs
        assert m[a, b].c_exp == m[b, a].c_exp
    assert len(C.pairwise_matrix(outcomes_from_rows(rng.random((2, 9)) < 0.5)).unique_pairs()) == 1


# bounds

def test_bounds_cobs_examples():
    assert tuple(C.bounds_cobs(0.5)) == (0.0, 1.0)
    assert tuple(C.bounds_cobs(1.0)) == (1.0, 1.0)
    assert tuple(C.bounds_cobs(0.0)) == (0.0, 0.0)
    b = C.bounds_cobs(0.74)
    assert b.lo == pytest.approx(math.sqrt(0.48), abs=1e-15) and b.hi == 1.0
    assert b.lo == pytest.approx(0.692820323027551, abs=1e-12)
    with pytest.raises(DomainError):
        C.bounds_cobs(1.0000001)


def test_bounds_cobs_074_by_sweep():
    # extremes of the feasible c_obs over accuracy pairs with c_exp = 0.74
    p = np.linspace(0.0, 1.0, 200001)
    # p_j solving p*q + (1-p)(1-q) = c  ->  q = (c - 1 + p) / (2p - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (0.74 - 1 + p) / (2 * p - 1)
    ok = (q >= 0) & (q <= 1) & np.isfinite(q)
    lo = np.abs(p[ok] + q[ok] - 1).min()
    hi = (1 - np.abs(p[ok] - q[ok])).max()
    assert lo == pytest.approx(C.bounds_cobs(0.74).lo, abs=1e-4)
    assert hi == pytest.approx(1.0, abs=1e-4)


def test_bounds_from_accuracies_examples():
    assert tuple(C.bounds_cobs_from_accuracies(1, 0)) == (0.0, 0.0)
    for p in (0.0, 0.2, 0.5, 0.93):
        b = C.bounds_cobs_from_accuracies(p, p)
        assert b.lo == pytest.approx(abs(2 * p - 1), abs=1e-15) and b.hi == 1.0
    b = C.bounds_cobs_from_accuracies(0.9, 0.8)
    assert b.lo == pytest.approx(0.7, abs=1e-15) and b.hi == pytest.approx(0.9, abs=1e-15)


def test_bounds_from_accuracies_by_enumeration():
    # n = 10, k_i = 9, k_j = 8: overlap counts achievable by placing the errors
    n, ki, kj = 10, 9, 8
    es = set()
    for both in range(max(0, ki + kj - n), min(ki, kj) + 1):
        es.add(n - ki - kj + 2 * both)
    assert min(es) / n == pytest.approx(0.7) and max(es) / n == pytest.approx(0.9)


def test_bounds_kappa_examples():
    assert tuple(C.bounds_kappa(0.5)) == (-1.0, 1.0)
    b = C.bounds_kappa(0.32)
    assert b.lo == pytest.approx(-0.32 / 0.68, abs=1e-14)
    assert b.lo == pytest.approx(-0.470588235294, abs=1e-11)
    # 1 - sqrt(0.36) - 0.32 = 0.08
    assert b.hi == pytest.approx(0.08 / 0.68, abs=1e-14)
    assert b.hi == pytest.approx(0.117647058824, abs=1e-11)
    b = C.bounds_kappa(0.74)
    assert b.lo == pytest.approx((math.sqrt(0.48) - 0.74) / 0.26, abs=1e-14)
    # (sqrt(0.48) - 0.74) / 0.26 = -0.18146029...
    assert b.lo == pytest.approx(-0.181460296, abs=1e-9)
    assert b.hi == 1.0
    with pytest.raises(UndefinedKappaError):
        C.bounds_kappa(1.0)
    assert C.bounds_kappa(0.0).lo == 0.0 and C.bounds_kappa(0.0).hi == 0.0


def test_bounds_near_half_do_not_flicker():
    for c in np.nextafter(0.5, [0.0, 1.0]):
        b = C.bounds_cobs(c)
        assert b.lo <= 1e-7 and b.hi >= 1 - 1e-7
        k = C.bounds_kappa(c)
        assert k.lo == pytest.approx(-1, abs=1e-7) and k.hi == pytest.approx(1, abs=1e-7)


# group mean CI

def test_group_mean_ci_examples():
    m, ci = C.group_mean_ci([0.4, 0.4, 0.4])
    assert m == 0.4 and tuple(ci) == (0.4, 0.4)
    m, ci = C.group_mean_ci([0.1, 0.2, 0.3])
    assert m == pytest.approx(0.2, abs=1e-15)
    sem = 0.1 / math.sqrt(3)
    assert sem == pytest.approx(0.0577350269, abs=1e-10)
    assert ci.lo == pytest.approx(0.2 - 1.959964 * sem, abs=1e-12)
    assert ci.hi == pytest.approx(0.2 + 1.959964 * sem, abs=1e-12)
    assert ci.lo == pytest.approx(0.0868414257, abs=1e-9)
    assert ci.hi == pytest.approx(0.3131585743, abs=1e-9)


def test_group_mean_ci_errors():
    with pytest.raises(InsufficientDataError):
        C.group_mean_ci([0.3])
    with pytest.raises(InsufficientDataError):
        C.group_mean_ci([0.3, UNDEFINED, 0.1])


def test_z_value():
    assert C.z_value(0.95) == 1.959964
    assert C.z_value(0.99) == pytest.approx(2.5758293035489, abs=1e-9)
    assert C.z_value(0.9) == pytest.approx(1.6448536269515, abs=1e-9)
    with pytest.raises(DomainError):
        C.z_value(1.0)


def test_ci_width_scales_inverse_sqrt(rng):
    widths = {}
    for m in (25, 100, 400):
        ws = [C.group_mean_ci(rng.normal(0.3, 0.1, m))[1].width for _ in range(400)]
        widths[m] = np.mean(ws)
    assert widths[25] / widths[100] == pytest.approx(2.0, rel=0.05)
    assert widths[100] / widths[400] == pytest.approx(2.0, rel=0.05)


# properties

@given(bool_pairs)
def test_cobs_within_accuracy_bounds(pair):
    a, b = (np.array(v) for v in pair)
    n = len(a)
    b_ = C.bounds_cobs_from_accuracies(a.sum() / n, b.sum() / n)
    assert b_.contains(C.observed_overlap(a, b), tol=1e-12)


@given(unit, unit)
def test_envelope(p, q):
    c = C.expected_overlap(p, q)
    env = C.bounds_cobs(c)
    acc = C.bounds_cobs_from_accuracies(p, q)
    assert env.lo <= acc.lo + 1e-7 and acc.hi <= env.hi + 1e-7


@given(unit.filter(lambda c: c < 1 - 1e-6), unit, unit)
def test_kappa_increasing_in_cobs(c_exp, x, y):
    if x == y:
        return
    lo, hi = min(x, y), max(x, y)
    klo, khi = C.kappa(lo, c_exp), C.kappa(hi, c_exp)
    assert klo <= khi
    if hi - lo > 1e-9:
        assert klo < khi


@given(unit.filter(lambda c: c < 1 - 1e-6))
def test_bounds_algebraic_consistency(c):
    cb, kb = C.bounds_cobs(c), C.bounds_kappa(c)
    assert C.kappa(cb.hi, c) == pytest.approx(kb.hi, abs=1e-10)
    assert C.kappa(cb.lo, c) == pytest.approx(kb.lo, abs=1e-10)


@given(bool_pairs)
def test_symmetry_and_negation(pair):
    a, b = (np.array(v) for v in pair)
    out = outcomes_from_rows([a, b])
    neg = outcomes_from_rows([~a, ~b])
    r = C.pair_consistency(out, "o0", "o1")
    s = C.pair_consistency(out, "o1", "o0")
    t = C.pair_consistency(neg, "o0", "o1")
    assert (r.c_obs, r.c_exp, r.kappa) == (s.c_obs, s.c_exp, s.kappa)
    assert t.c_obs == r.c_obs
    assert t.p_i == pytest.approx(1 - r.p_i, abs=1e-15)
    assert t.c_exp == pytest.approx(r.c_exp, abs=1e-14)
    if r.kappa is UNDEFINED:
        assert t.kappa is UNDEFINED
    else:
        assert t.kappa == pytest.approx(r.kappa, abs=1e-12)


@pytest.mark.parametrize("p", np.linspace(0, 1, 41))
def test_cexp_above_half_iff_same_side(p):
    for q in np.linspace(0, 1, 41):
        c = C.expected_overlap(p, q)
        same_side = (p > 0.5 and q > 0.5) or (p < 0.5 and q < 0.5)
        # c - 0.5 = 2 (p - 0.5)(q - 0.5); compare on the exact sign
        assert (c > 0.5) == same_side or abs(c - 0.5) < 1e-15


def test_interval_type():
    i = Interval(0.1, 0.3)
    assert i.contains(0.3) and not i.contains(0.31)
    assert i.width == pytest.approx(0.2)
    with pytest.raises(ValueError):
        Interval(0.4, 0.3)
