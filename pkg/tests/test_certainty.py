import math

import numpy as np
import pytest

from gnz.certainty import (
    PseudoLabelSet,
    certainty_weights,
    entropy_certainty,
    extract_pseudo_labels,
    harden_labels,
    read_pseudo_labels,
    write_pseudo_labels,
)
from gnz.errors import ConfigError
from gnz.formats import LabelSet


def certainty_oracle(row):
    """Direct evaluation of the entropy formula, scalar loops only."""
    row = [float(v) for v in row]
    lo = min(row)
    if lo < 0:
        row = [v - lo for v in row]
    total = sum(row)
    c = len(row)
    if total == 0:
        return 0.0
    p = [v / total for v in row]
    entropy = -sum(v * math.log(v) for v in p if v > 0)
    return min(max(1.0 - entropy / math.log(c), 0.0), 1.0)


# ---------------------------------------------------------------------------
# hardening


def test_harden_basic():
    assert harden_labels(np.array([[0.2, 0.8]]))[0] == 1


def test_harden_tie_break():
    assert harden_labels(np.array([[0.5, 0.5]]))[0] == 0


def test_harden_matches_linear_scan_oracle(rng):
    h = rng.normal(size=(40, 5))
    got = harden_labels(h)
    for i in range(40):
        best, arg = -np.inf, 0
        for k in range(5):
            if h[i, k] > best:
                best, arg = h[i, k], k
        assert got[i] == arg


def test_harden_invariant_under_increasing_transform(rng):
    h = rng.normal(size=(30, 4))
    base = harden_labels(h)
    assert np.array_equal(harden_labels(np.exp(h)), base)
    assert np.array_equal(harden_labels(3.0 * h + 7.0), base)


# ---------------------------------------------------------------------------
# entropy certainty


def test_uniform_row_is_zero():
    assert entropy_certainty([0.25, 0.25, 0.25, 0.25]) == 0.0


def test_one_hot_row_is_one():
    assert entropy_certainty([0.0, 1.0, 0.0]) == 1.0


def test_point_nine_point_one():
    # M((0.9, 0.1)) ~ 0.32508, xi ~ 0.53101
    xi = entropy_certainty([0.9, 0.1])
    assert np.isclose(xi, certainty_oracle([0.9, 0.1]), rtol=1e-12)
    assert np.isclose(xi, 0.53101, atol=5e-6)


def test_negative_entries_shift_rule(rng):
    for _ in range(20):
        row = rng.normal(size=4)
        assert np.isclose(entropy_certainty(row), certainty_oracle(row), rtol=1e-12, atol=1e-15)


def test_all_equal_row_is_uniform_convention():
    assert entropy_certainty([3.0, 3.0, 3.0]) == 0.0
    assert entropy_certainty([-2.0, -2.0]) == 0.0


def test_certainty_permutation_invariant(rng):
    row = rng.normal(size=5)
    base = entropy_certainty(row)
    for seed in range(4):
        perm = np.random.default_rng(seed).permutation(5)
        assert np.isclose(entropy_certainty(row[perm]), base, rtol=1e-12)


def test_binary_monotonicity_in_max_probability():
    ps = np.linspace(0.505, 1.0, 99)
    xis = [entropy_certainty([p, 1.0 - p]) for p in ps]
    assert all(b > a for a, b in zip(xis, xis[1:]))


def test_certainty_needs_two_classes():
    with pytest.raises(ConfigError):
        entropy_certainty([1.0])


def test_vectorized_matches_scalar(rng):
    h = rng.normal(size=(25, 3))
    vec = certainty_weights(h)
    for i in range(25):
        assert np.isclose(vec[i], entropy_certainty(h[i]), rtol=1e-12)


# ---------------------------------------------------------------------------
# pseudo-label extraction


def _labels(n, pairs, c=2):
    return LabelSet(n=n, num_classes=c, labeled=tuple(pairs))


def test_all_labeled_gives_empty_set():
    h = np.eye(3)
    ls = _labels(3, [(0, 0), (1, 1), (2, 2)], c=3)
    ps = extract_pseudo_labels(h, ls)
    assert len(ps) == 0


def test_single_unlabeled_one_hot():
    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    ls = _labels(2, [(0, 0)])
    ps = extract_pseudo_labels(h, ls)
    assert list(ps.ids) == [1]
    assert list(ps.labels) == [1]
    assert list(ps.weights) == [1.0]


def test_balancing_formula():
    # 4 unlabeled, pseudo-labels 3:1 across two classes, raw xi = 1 everywhere:
    # target = 4/2 = 2, majority factor 2/3, minority factor 2 clamped to 1
    h = np.array(
        [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    )
    ls = _labels(6, [(0, 0), (1, 1)])
    ps = extract_pseudo_labels(h, ls, balance=True)
    by_id = dict(zip(ps.ids, ps.weights))
    assert np.isclose(by_id[2], 2.0 / 3.0, rtol=1e-12)
    assert np.isclose(by_id[3], 2.0 / 3.0, rtol=1e-12)
    assert np.isclose(by_id[4], 2.0 / 3.0, rtol=1e-12)
    assert by_id[5] == 1.0  # clamped from 2.0


def test_coverage_partition(rng):
    h = rng.normal(size=(30, 3))
    ls = _labels(30, [(2, 0), (11, 1), (20, 2)], c=3)
    ps = extract_pseudo_labels(h, ls)
    union = set(ps.ids.tolist()) | {i for i, _ in ls.labeled}
    assert union == set(range(30))
    assert not (set(ps.ids.tolist()) & {i for i, _ in ls.labeled})


def test_pseudo_csv_round_trip(tmp_path, rng):
    ids = np.array([3, 7, 9])
    labels = np.array([1, 0, 2])
    weights = np.array([0.25, 1.0, 0.0])
    ps = PseudoLabelSet(ids=ids, labels=labels, weights=weights)
    path = tmp_path / "pseudo.csv"
    write_pseudo_labels(ps, path)
    back = read_pseudo_labels(path)
    assert np.array_equal(back.ids, ps.ids)
    assert np.array_equal(back.labels, ps.labels)
    assert np.allclose(back.weights, ps.weights, rtol=1e-9)


def test_pseudo_weights_validated():
    with pytest.raises(ConfigError):
        PseudoLabelSet(ids=np.array([0]), labels=np.array([0]), weights=np.array([1.5]))
