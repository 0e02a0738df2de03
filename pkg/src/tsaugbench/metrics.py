"""Dataset characterisation metrics and the relative-gain score.

These are the quantities used to profile a classification dataset before
benchmarking: a multivariate variance, a Hellinger-based class-imbalance
degree, the train/test mean distance, the missing-value proportion, and
the relative accuracy gain of an augmented model over its baseline.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .core import LabeledDataset, MissingDataError, class_counts, flatten
from .tsfile import ImputePolicy, impute


class MetricError(Exception):
    """Base error for metric computations."""


class DimensionMismatchError(MetricError):
    pass


class NotADistributionError(MetricError):
    pass


class EmptyDatasetError(MetricError):
    pass


class ShapeMismatchError(MetricError):
    pass


class ZeroBaselineError(MetricError):
    pass


@dataclass(frozen=True)
class DatasetProfile:
    """The per-dataset property vector reported by ``profile``."""

    n_classes: int
    train_size: int
    dim: int
    length: int
    var_train: float
    var_test: float
    im_ratio: float
    d_train_test: float
    prop_miss: float


@dataclass(frozen=True)
class GainRecord:
    baseline_acc: float
    augmented_acc: float
    relative_gain_pct: float


def dataset_variance(ds: LabeledDataset) -> float:
    """Mean over (channel, step) of the across-series population variance.

    For each fixed channel m and step t, the variance of x[i, m, t] over
    the N series is taken with the 1/N convention; the result averages
    those M*T variances.
    """
    if not ds.items:
        raise EmptyDatasetError("variance of an empty dataset is undefined")
    if not ds.fully_observed:
        raise MissingDataError("dataset has missing values; impute first")
    x = ds.to_array()  # (N, M, T)
    return float(np.mean(np.var(x, axis=0)))


def hellinger(p, q) -> float:
    """Hellinger distance (1/sqrt(2)) * ||sqrt(p) - sqrt(q)||_2 in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionMismatchError(f"distributions differ in shape: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0):
            raise NotADistributionError(f"{name} has negative entries")
        if abs(v.sum() - 1.0) > 1e-9:
            raise NotADistributionError(f"{name} sums to {v.sum()!r}, not 1")
    return float(np.sqrt(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)) / np.sqrt(2.0))


def imbalance_degree(ds: LabeledDataset) -> float:
    """Hellinger-based imbalance degree of the empirical class distribution.

    With K classes, m of which are minority (frequency strictly below 1/K),
    the score is d(z, e) / d(i_m, e) + (m - 1), where z is the empirical
    distribution, e the uniform one, and i_m the most-distant distribution
    with exactly m minority classes: the m smallest classes at probability
    zero with their mass handed to a single majority class. Balanced data
    (m = 0) scores 0. Ties at exactly 1/K count as majority.
    """
    if ds.n_classes < 1 or not ds.items:
        raise EmptyDatasetError("imbalance degree needs at least one class and one item")
    counts = class_counts(ds)
    k = ds.n_classes
    zeta = counts / counts.sum()
    m = int(np.sum(zeta < 1.0 / k))
    if m == 0:
        return 0.0
    e = np.full(k, 1.0 / k)
    iota = np.concatenate([np.zeros(m), np.full(k - m - 1, 1.0 / k), [(m + 1) / k]])
    return float(hellinger(zeta, e) / hellinger(iota, e) + (m - 1))


def _mean_flat_vector(ds: LabeledDataset) -> np.ndarray:
    return np.mean([flatten(s) for s, _ in ds.items], axis=0)


def train_test_distance(train: LabeledDataset, test: LabeledDataset) -> float:
    """Euclidean distance between the mean flattened vectors of both sets."""
    if not train.items or not test.items:
        raise EmptyDatasetError("train/test distance needs non-empty sets")
    if train.n_channels != test.n_channels or train.common_length != test.common_length:
        raise ShapeMismatchError(
            f"train is {train.n_channels}x{train.common_length}, "
            f"test is {test.n_channels}x{test.common_length}"
        )
    return float(np.linalg.norm(_mean_flat_vector(train) - _mean_flat_vector(test)))


def missing_proportion(ds: LabeledDataset) -> float:
    """Missing (channel, step) entries divided by total entries."""
    total = 0
    missing = 0
    for s, _ in ds.items:
        total += s.observed.size
        missing += int(s.observed.size - s.observed.sum())
    return missing / total if total else 0.0


def relative_gain(baseline_acc: float, augmented_acc: float) -> GainRecord:
    """Percentage gain of the augmented accuracy over the baseline."""
    if baseline_acc <= 0:
        raise ZeroBaselineError("relative gain is undefined for a non-positive baseline")
    pct = 100.0 * (augmented_acc - baseline_acc) / baseline_acc
    return GainRecord(baseline_acc, augmented_acc, pct)


def profile(
    train: LabeledDataset,
    test: LabeledDataset,
    policy: ImputePolicy | None = None,
) -> DatasetProfile:
    """Full property vector for a train/test pair.

    prop_miss is measured on the raw training set; variances and the
    train/test distance are measured after imputing and padding both sets
    to their joint maximum length with ``policy``.
    """
    if not train.items or not test.items:
        raise EmptyDatasetError("profile needs non-empty train and test sets")
    prop_miss = missing_proportion(train)
    policy = policy or ImputePolicy()
    if policy.pad_to is None:
        joint = max(s.n_steps for part in (train, test) for s, _ in part.items)
        policy = ImputePolicy(policy.method, joint, policy.pad_fill, policy.truncate)
    train_i = impute(train, policy)
    test_i = impute(test, policy)
    return DatasetProfile(
        n_classes=train.n_classes,
        train_size=len(train),
        dim=train.n_channels,
        length=train_i.common_length,
        var_train=dataset_variance(train_i),
        var_test=dataset_variance(test_i),
        im_ratio=imbalance_degree(train),
        d_train_test=train_test_distance(train_i, test_i),
        prop_miss=prop_miss,
    )


PROFILE_COLUMNS = (
    "Dataset",
    "n_classes",
    "Train_size",
    "Dim",
    "Length",
    "Var_train",
    "Var_test",
    "Im_ratio",
    "d_train_test",
    "prop_miss",
)


def profile_csv(rows: dict) -> str:
    """CSV with one row per dataset, mirroring the profile column order.

    ``rows`` maps dataset name to DatasetProfile.
    """
    out = io.StringIO()
    out.write(",".join(PROFILE_COLUMNS) + "\n")
    for name, p in rows.items():
        out.write(
            f"{name},{p.n_classes},{p.train_size},{p.dim},{p.length},"
            f"{p.var_train:.6g},{p.var_test:.6g},{p.im_ratio:.6g},"
            f"{p.d_train_test:.6g},{p.prop_miss:.6g}\n"
        )
    return out.getvalue()
