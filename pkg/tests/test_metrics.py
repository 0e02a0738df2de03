import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from tsaugbench.core import LabeledDataset, MissingDataError, Series
from tsaugbench.metrics import (
    DimensionMismatchError,
    EmptyDatasetError,
    NotADistributionError,
    PROFILE_COLUMNS,
    ShapeMismatchError,
    ZeroBaselineError,
    dataset_variance,
    hellinger,
    imbalance_degree,
    missing_proportion,
    profile,
    profile_csv,
    relative_gain,
    train_test_distance,
)


def scalar_dataset(values_labels, labels=("a", "b")):
    items = tuple((Series([[float(v)]], id=str(i)), y) for i, (v, y) in enumerate(values_labels))
    return LabeledDataset(items, labels)


def test_variance_identical_series_is_zero():
    s = Series([[1.0, 2.0], [3.0, 4.0]])
    ds = LabeledDataset(((s, 0), (s, 0), (s, 0)), ("a",))
    assert dataset_variance(ds) == 0.0


def test_variance_two_point_case():
    ds = scalar_dataset([(0.0, 0), (2.0, 0)], labels=("a",))
    assert dataset_variance(ds) == 1.0


def test_variance_brute_force_oracle(gen):
    for _ in range(10):
        n, m, t = int(gen.integers(2, 7)), int(gen.integers(1, 4)), int(gen.integers(1, 6))
        ds = random_dataset(gen, n, m, t, n_classes=2)
        x = ds.to_array()
        total = 0.0
        for mm in range(m):
            for tt in range(t):
                col = x[:, mm, tt]
                mean = col.sum() / n
                total += ((col - mean) ** 2).sum() / n
        expected = total / (m * t)
        assert dataset_variance(ds) == pytest.approx(expected, rel=1e-10)


def test_variance_scaling_law(gen):
    ds = random_dataset(gen, 6, 2, 5)
    c = 3.7
    scaled = LabeledDataset(
        tuple((Series(s.values * c, id=s.id), y) for s, y in ds.items), ds.labels
    )
    assert dataset_variance(scaled) == pytest.approx(c**2 * dataset_variance(ds), rel=1e-9)


def test_variance_requires_observed():
    s = Series([[1.0, np.nan]], observed=[[True, False]])
    with pytest.raises(MissingDataError):
        dataset_variance(LabeledDataset(((s, 0),), ("a",)))
    with pytest.raises(EmptyDatasetError):
        dataset_variance(LabeledDataset((), ("a",)))


def test_hellinger_identity_and_disjoint():
    assert hellinger([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert hellinger([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)


def test_hellinger_closed_form_case():
    # direct evaluation: sqrt(1 - sum(sqrt(p*q)))
    p, q = (0.75, 0.25), (0.5, 0.5)
    expected = math.sqrt(1.0 - sum(math.sqrt(a * b) for a, b in zip(p, q)))
    assert expected == pytest.approx(0.1846, abs=5e-5)
    assert hellinger(p, q) == pytest.approx(expected, rel=1e-12)


def test_hellinger_rejects_bad_input():
    with pytest.raises(DimensionMismatchError):
        hellinger([1.0], [0.5, 0.5])
    with pytest.raises(NotADistributionError):
        hellinger([0.7, 0.2], [0.5, 0.5])
    with pytest.raises(NotADistributionError):
        hellinger([-0.5, 1.5], [0.5, 0.5])


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_hellinger_properties(k, seed):
    gen = np.random.default_rng(seed)
    p, q, r = (gen.dirichlet(np.ones(k)) for _ in range(3))
    dpq, dqr, dpr = hellinger(p, q), hellinger(q, r), hellinger(p, r)
    assert 0.0 <= dpq <= 1.0 + 1e-12
    assert dpq == pytest.approx(hellinger(q, p), rel=1e-12)
    assert dpr <= dpq + dqr + 1e-12


def test_imbalance_degree_balanced_is_zero():
    ds = scalar_dataset([(0.0, 0), (1.0, 1), (2.0, 0), (3.0, 1)])
    assert imbalance_degree(ds) == 0.0


def test_imbalance_degree_hand_case():
    ds = scalar_dataset([(0.0, 0), (1.0, 0), (2.0, 0), (3.0, 1)])
    # one minority class; extreme distribution concentrates everything in one class
    num = hellinger([0.75, 0.25], [0.5, 0.5])
    den = hellinger([1.0, 0.0], [0.5, 0.5])
    assert imbalance_degree(ds) == pytest.approx(num / den, rel=1e-12)
    assert imbalance_degree(ds) == pytest.approx(0.341, abs=1e-3)


def test_imbalance_degree_label_permutation_invariant():
    a = scalar_dataset([(0.0, 0), (1.0, 0), (2.0, 0), (3.0, 1)])
    b = scalar_dataset([(0.0, 1), (1.0, 1), (2.0, 1), (3.0, 0)])
    assert imbalance_degree(a) == pytest.approx(imbalance_degree(b), rel=1e-12)


def test_imbalance_degree_duplication_invariant():
    base = [(0.0, 0), (1.0, 0), (2.0, 1)]
    once = scalar_dataset(base)
    twice = scalar_dataset(base + base)
    assert imbalance_degree(once) == pytest.approx(imbalance_degree(twice), rel=1e-12)


def test_imbalance_degree_more_minority_classes():
    # 3 classes, two of them minority: score must exceed 1
    ds = scalar_dataset([(0.0, 0)] * 8 + [(1.0, 1), (2.0, 2)], labels=("a", "b", "c"))
    assert imbalance_degree(ds) > 1.0


def test_train_test_distance_cases():
    train = scalar_dataset([(0.0, 0), (0.0, 0)], labels=("a",))
    assert train_test_distance(train, train) == 0.0
    a = LabeledDataset(((Series([[0.0], [0.0]], id="a"), 0),), ("a",))
    b = LabeledDataset(((Series([[3.0], [4.0]], id="b"), 0),), ("a",))
    assert train_test_distance(a, b) == pytest.approx(5.0)
    assert train_test_distance(b, a) == pytest.approx(5.0)
    with pytest.raises(ShapeMismatchError):
        train_test_distance(a, LabeledDataset(((Series([[1.0, 2.0]], id="c"), 0),), ("a",)))


def test_missing_proportion():
    full = scalar_dataset([(0.0, 0)], labels=("a",))
    assert missing_proportion(full) == 0.0
    s = Series([[1.0, np.nan], [2.0, 3.0]], observed=[[True, False], [True, True]])
    ds = LabeledDataset(((s, 0),), ("a",))
    assert missing_proportion(ds) == 0.25


def test_relative_gain():
    assert relative_gain(98.52, 99.19).relative_gain_pct == pytest.approx(0.68, abs=5e-3)
    assert relative_gain(89.16, 91.15).relative_gain_pct == pytest.approx(2.23, abs=5e-3)
    assert relative_gain(50.0, 50.0).relative_gain_pct == 0.0
    assert relative_gain(50.0, 40.0).relative_gain_pct < 0.0
    with pytest.raises(ZeroBaselineError):
        relative_gain(0.0, 10.0)


def test_profile_composition(gen):
    train = random_dataset(gen, 8, 2, 6, n_classes=2, name="toy")
    # force perfect balance
    items = tuple((s, i % 2) for i, (s, _) in enumerate(train.items))
    train = LabeledDataset(items, train.labels, name="toy")
    prof = profile(train, train)
    assert prof.n_classes == 2
    assert prof.train_size == 8
    assert prof.dim == 2
    assert prof.length == 6
    assert prof.im_ratio == 0.0
    assert prof.d_train_test == 0.0
    assert prof.prop_miss == 0.0
    assert prof.var_train == pytest.approx(prof.var_test, rel=1e-12)


def test_profile_handles_missing_and_variable(gen):
    train = random_dataset(gen, 6, 2, 8, missing=0.2, variable=True, name="v")
    test = random_dataset(gen, 4, 2, 8, missing=0.1, variable=True, name="v")
    prof = profile(train, test)
    assert prof.prop_miss > 0.0
    assert prof.length == max(s.n_steps for part in (train, test) for s, _ in part.items)


def test_profile_csv_shape(gen):
    ds = random_dataset(gen, 4, 1, 5)
    text = profile_csv({"toy": profile(ds, ds)})
    lines = text.splitlines()
    assert lines[0].split(",") == list(PROFILE_COLUMNS)
    assert lines[1].startswith("toy,2,4,1,5,")
