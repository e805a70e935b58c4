import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_erm, socp_margin
from critpoints.generators import random_separable
from critpoints.geometry import DomainError, construct_margin_third
from critpoints.hypothesis import (
    FiniteClass,
    LabeledSet,
    LinearMarginClass,
    Oracle,
    erm_with_slack,
    max_margin,
    membership_finite,
    membership_linear_margin,
)


def third_flip(n):
    x, w = construct_margin_third(n)
    labels = -np.ones(n, dtype=int)
    labels[0] = 1
    return LabeledSet(x, labels), w


def isolated_margin(n):
    # min-norm point of conv{x_1, -x_2, ..., -x_n} by symmetry
    return math.sqrt((n + 2) / (3 * (3 * n - 2)))


@pytest.mark.parametrize("n", [2, 3, 4, 6, 8])
def test_max_margin_third_flip_matches_socp(n):
    ls, w = third_flip(n)
    res = max_margin(ls)
    t, _ = socp_margin(ls.points, ls.labels)
    assert res.separable
    assert res.margin == pytest.approx(isolated_margin(n), abs=1e-7)
    assert res.margin == pytest.approx(t, abs=1e-6)
    # the construction's witness reaches 1/3 but is not the maximizer for n > 1
    assert float(np.min(ls.signed() @ w[0])) == pytest.approx(1 / 3, abs=1e-12)
    assert float(np.min(ls.signed() @ res.w)) == pytest.approx(res.margin, abs=1e-12)


def test_max_margin_antipodal_pair():
    res = max_margin(LabeledSet([[1.0, 0.0], [-1.0, 0.0]], [1, -1]))
    assert res.separable
    assert res.margin == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(res.w, [1.0, 0.0], atol=1e-9)


def test_max_margin_identical_opposite():
    res = max_margin(LabeledSet([[1.0, 0.0], [1.0, 0.0]], [1, -1]))
    assert not res.separable
    assert res.margin <= 0.0


def test_max_margin_empty_raises():
    with pytest.raises(DomainError):
        max_margin(LabeledSet(np.zeros((0, 2)), []))


def test_labeled_set_rejects_zero_point():
    with pytest.raises(DomainError):
        LabeledSet([[0.0, 0.0]], [1])
    with pytest.raises(DomainError):
        LabeledSet([[1.0, 0.0]], [0])


def test_membership_third_examples():
    ls, _ = third_flip(4)
    assert membership_linear_margin(ls, 1 / 3).realizable
    top = isolated_margin(4)
    assert membership_linear_margin(ls, top - 1e-8).realizable
    assert not membership_linear_margin(ls, top + 1e-5).realizable


def test_membership_one_sided():
    pts = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.1]]
    v = membership_linear_margin(LabeledSet(pts, [1, 1, 1]), 1.0)
    assert v.realizable and v.witness is not None
    v = membership_linear_margin(LabeledSet(pts, [-1, -1, -1]), 1.0)
    assert v.realizable


def test_membership_gamma_zero_needs_strict_separation():
    ls = LabeledSet([[1.0, 0.0], [0.0, 1.0]], [1, -1])
    assert membership_linear_margin(ls, 0.0).realizable
    ls = LabeledSet([[1.0, 0.0], [2.0, 0.0]], [1, -1])
    assert not membership_linear_margin(ls, 0.0).realizable


def test_membership_rejects_bad_gamma():
    with pytest.raises(DomainError):
        membership_linear_margin(LabeledSet([[1.0]], [1]), 1.5)


points_2d = st.lists(
    st.tuples(st.floats(-1, 1), st.floats(-1, 1)).filter(lambda p: math.hypot(*p) > 0.05),
    min_size=2, max_size=8,
)


def _labeled(pts, bits):
    labels = [1 if b else -1 for b in bits[: len(pts)]]
    labels += [1] * (len(pts) - len(labels))
    return LabeledSet(np.array(pts), labels)


@given(points_2d, st.lists(st.booleans(), min_size=8, max_size=8), st.floats(0.01, 50))
def test_scaling_does_not_change_verdicts(pts, bits, c):
    ls = _labeled(pts, bits)
    scaled = LabeledSet(ls.points * c, ls.labels)
    for g in (0.0, 0.2, 0.5):
        assert membership_linear_margin(ls, g).realizable == membership_linear_margin(scaled, g).realizable


@given(points_2d, st.lists(st.booleans(), min_size=8, max_size=8), st.floats(0, 1), st.floats(0, 1))
def test_membership_monotone_in_gamma(pts, bits, a, b):
    ls = _labeled(pts, bits)
    lo, hi = sorted((a, b))
    if membership_linear_margin(ls, hi).realizable:
        assert membership_linear_margin(ls, lo).realizable


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(2, 12))
def test_max_margin_matches_socp_when_separable(seed, d, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    labels = np.where(pts @ w > 0, 1, -1)
    if np.all(labels == labels[0]):
        labels[0] *= -1
    ls = LabeledSet(pts, labels)
    res = max_margin(ls)
    t, _ = socp_margin(pts, labels)
    if t > 1e-6:
        assert res.separable
        assert res.margin == pytest.approx(t, abs=1e-6)
        assert np.linalg.norm(res.w) == pytest.approx(1.0, abs=1e-12)
    elif t < -1e-6:
        assert not res.separable


def small_class():
    universe = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return FiniteClass.from_positive_sets(universe, [{0}]), universe


def test_finite_examples():
    cls, u = small_class()
    v = membership_finite(cls, LabeledSet(u[[0]], [1]))
    assert v.realizable and v.witness == 0
    assert not membership_finite(cls, LabeledSet(u[[0, 1]], [1, 1])).realizable
    assert membership_finite(cls, LabeledSet(np.zeros((0, 2)), [])).realizable


def test_finite_unknown_point():
    cls, _ = small_class()
    with pytest.raises(DomainError):
        membership_finite(cls, LabeledSet([[5.0, 5.0]], [1]))


def test_finite_lowest_index_witness():
    u = np.eye(3)
    cls = FiniteClass.from_positive_sets(u, [{1}, {0}, {0, 2}, {0}])
    assert membership_finite(cls, LabeledSet(u[[0]], [1])).witness == 1
    assert membership_finite(cls, LabeledSet(u[[0, 1]], [1, -1])).witness == 1


def _scan(hyps, idx, labels):
    for h, row in enumerate(hyps):
        if all(row[i] == y for i, y in zip(idx, labels)):
            return h
    return None


@given(st.integers(0, 2**32 - 1))
def test_finite_matches_independent_scan(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 7))
    u = rng.normal(size=(m, 2))
    hyps = rng.choice([-1, 1], size=(int(rng.integers(0, 9)), m))
    cls = FiniteClass(u, hyps)
    for _ in range(10):
        idx = rng.choice(m, size=int(rng.integers(0, m + 1)), replace=False)
        labels = rng.choice([-1, 1], size=len(idx))
        v = membership_finite(cls, LabeledSet(u[idx].reshape(len(idx), 2), labels))
        expect = _scan(hyps, idx, labels)
        assert v.realizable == (expect is not None)
        if expect is not None:
            assert v.witness == expect


def test_finite_rejects_ragged():
    with pytest.raises(DomainError):
        FiniteClass(np.eye(2), [[1, -1, 1]])
    with pytest.raises(DomainError):
        FiniteClass(np.eye(2), [[1, 0]])


def test_erm_zero_slack_is_membership_with_anchor_positive():
    rng = np.random.default_rng(3)
    cls = LinearMarginClass(0.2)
    for _ in range(30):
        pts = rng.normal(size=(6, 3))
        labels = rng.choice([-1, 1], size=6)
        anchor = int(rng.integers(6))
        forced = labels.copy()
        forced[anchor] = 1
        v = erm_with_slack(LabeledSet(pts, labels), anchor, 0, cls)
        assert v.realizable == membership_linear_margin(LabeledSet(pts, forced), 0.2).realizable


def test_erm_third_anchor():
    x, _ = construct_margin_third(4)
    v = erm_with_slack(LabeledSet(x, [-1] * 4), 0, 1, LinearMarginClass(1 / 3))
    assert v.realizable and v.error_count == 0


def test_erm_finite_all_negative_class():
    u = np.eye(3)
    cls = FiniteClass.from_positive_sets(u, [set()])
    assert not erm_with_slack(LabeledSet(u, [-1, -1, -1]), 1, 0, cls).realizable


def test_erm_finite_counts_errors():
    u = np.eye(3)
    cls = FiniteClass.from_positive_sets(u, [{0, 1}])
    v = erm_with_slack(LabeledSet(u, [-1, -1, -1]), 0, 1, cls)
    assert v.realizable and v.error_count == 1 and v.exempt == (1,)
    assert not erm_with_slack(LabeledSet(u, [-1, -1, -1]), 0, 0, cls).realizable
    assert not erm_with_slack(LabeledSet(u, [-1, -1, -1]), 2, 2, cls).realizable


def test_erm_caps():
    cls = LinearMarginClass(0.5)
    with pytest.raises(DomainError):
        erm_with_slack(LabeledSet(np.eye(3), [1, -1, -1]), 0, 4, cls)
    pts = np.random.default_rng(0).normal(size=(65, 3))
    with pytest.raises(DomainError):
        erm_with_slack(LabeledSet(pts, [1] * 65), 0, 1, cls)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2), st.sampled_from([0.1, 0.3, 0.5]))
def test_erm_matches_subset_enumeration(seed, slack, gamma):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    pts = rng.normal(size=(n, 2))
    labels = rng.choice([-1, 1], size=n)
    anchor = int(rng.integers(n))
    v = erm_with_slack(LabeledSet(pts, labels), anchor, slack, LinearMarginClass(gamma))
    expect = brute_erm(pts, labels, anchor, slack, gamma)
    assert v.realizable == (expect is not None)
    if expect is not None:
        assert v.error_count == expect
        assert anchor not in v.exempt
        keep = [i for i in range(n) if i not in v.exempt]
        forced = labels.copy()
        forced[anchor] = 1
        assert membership_linear_margin(LabeledSet(pts[keep], forced[keep]), gamma).realizable


@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_erm_monotone_in_slack(seed, slack):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(7, 3))
    labels = rng.choice([-1, 1], size=7)
    cls = LinearMarginClass(0.4)
    if erm_with_slack(LabeledSet(pts, labels), 0, slack, cls).realizable:
        assert erm_with_slack(LabeledSet(pts, labels), 0, slack + 1, cls).realizable


def test_oracle_counts_calls_and_maps_exemptions():
    u = np.eye(4)
    cls = FiniteClass.from_positive_sets(u, [{1, 3}])
    orc = Oracle(u, cls)
    v = orc.erm([3], [0, 1, 2], 3, 1)
    assert v.realizable and v.exempt == (1,)
    assert orc.realizable([1, 3], [0, 2]).realizable
    assert orc.calls == 2
    assert list(orc.labels_of(v.witness)) == [-1, 1, -1, 1]


def test_oracle_linear_labels_of():
    x, w = construct_margin_third(3)
    orc = Oracle(x, LinearMarginClass(1 / 3))
    v = orc.realizable([0], [1, 2])
    assert v.realizable
    assert list(orc.labels_of(v.witness)) == [1, -1, -1]


def test_max_margin_ignores_row_order():
    # this ordering once stalled the inner least-squares solve short of optimal
    inst = random_separable(0.5, 4, 30, seed=2, flips=1)
    order = np.argsort(-inst.labels, kind="stable")
    keep = [i for i in order if i != 15]
    a = max_margin(LabeledSet(inst.points[keep], inst.labels[keep]))
    b = max_margin(LabeledSet(inst.points[sorted(keep)], inst.labels[sorted(keep)]))
    t, _ = socp_margin(inst.points[keep], inst.labels[keep])
    assert a.margin == pytest.approx(b.margin, abs=1e-9)
    assert a.margin == pytest.approx(t, abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_max_margin_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(3, 30)), int(rng.integers(2, 7))
    pts = rng.normal(size=(n, d))
    labels = np.where(pts @ rng.normal(size=d) + 0.3 * rng.normal(size=n) > 0, 1, -1)
    perm = rng.permutation(n)
    a = max_margin(LabeledSet(pts, labels))
    b = max_margin(LabeledSet(pts[perm], labels[perm]))
    assert a.separable == b.separable
    if a.separable:
        assert a.margin == pytest.approx(b.margin, abs=1e-9)
