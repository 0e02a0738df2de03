"""Core data model: multivariate series, labeled datasets, named RNG streams.

Everything here is immutable after construction and safe to share across
workers; the operations are pure functions of their arguments.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


class DatasetError(Exception):
    """Base error for data-model construction and operations."""


class InvalidSeriesError(DatasetError):
    """Series arrays are malformed (shape, emptiness, non-finite values)."""


class InvalidDatasetError(DatasetError):
    """Dataset items are inconsistent with each other or the label alphabet."""


class MissingDataError(DatasetError):
    """An operation that requires fully observed values met missing entries."""


@dataclass(frozen=True)
class RngStream:
    """Named, seedable randomness stream.

    The same ``(seed, label)`` pair always yields the same draw sequence,
    independently of platform and of every other stream, so experiment
    cells can be seeded hierarchically::

        base = RngStream(7)
        rng = base.child("noise_1").child("run3")

    Each call to :meth:`generator` restarts the stream from its head;
    callers that need independent randomness must split off child streams
    rather than reuse one.
    """

    seed: int
    label: str = ""

    def child(self, label: str) -> "RngStream":
        sep = "/" if self.label else ""
        return RngStream(self.seed, f"{self.label}{sep}{label}")

    def generator(self) -> np.random.Generator:
        # SHA-256 maps the label to entropy words platform-independently;
        # Philox is counter-based, so streams never collide or overlap.
        digest = hashlib.sha256(self.label.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        seq = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *words])
        return np.random.Generator(np.random.Philox(seq))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Series:
    """One multivariate time series: ``values[m, t]`` over M channels, T steps.

    ``observed[m, t]`` is True where a value was measured; unobserved cells
    hold NaN and are ignored by every statistic. Arrays are defensively
    copied and frozen.
    """

    values: np.ndarray
    observed: np.ndarray | None = None
    id: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidSeriesError(f"values must be 2-D (channels x steps), got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidSeriesError(f"series needs at least one channel and one step, got {values.shape}")
        if self.observed is None:
            observed = np.ones(values.shape, dtype=bool)
        else:
            observed = np.array(self.observed, dtype=bool)
        if observed.shape != values.shape:
            raise InvalidSeriesError(
                f"observed mask shape {observed.shape} does not match values shape {values.shape}"
            )
        if not np.all(np.isfinite(values[observed])):
            raise InvalidSeriesError("observed values must be finite")
        values[~observed] = np.nan
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "observed", _readonly(observed))

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def fully_observed(self) -> bool:
        return bool(self.observed.all())

    def with_values(self, values: np.ndarray, id: str | None = None) -> "Series":
        """Fully observed copy carrying new values (same shape family)."""
        return Series(values, None, self.id if id is None else id)

    def value_equal(self, other: "Series") -> bool:
        """Bit-equality of masks and observed values; ids are not compared."""
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.observed, other.observed)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class SynthesisRecord:
    """Provenance of one synthetic series: who parented it, how, with what draws."""

    series_id: str
    parent_ids: tuple[str, ...]
    technique: str
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Ordered (Series, label index) pairs plus the label alphabet.

    ``synthesis``, when present, aligns with ``items`` and marks synthetic
    entries with their provenance record (None for originals).
    """

    items: tuple
    labels: tuple
    name: str = ""
    synthesis: tuple | None = None

    def __post_init__(self):
        items = tuple((s, int(y)) for s, y in self.items)
        labels = tuple(str(c) for c in self.labels)
        if len(set(labels)) != len(labels):
            raise InvalidDatasetError("label names must be distinct")
        for s, y in items:
            if not 0 <= y < len(labels):
                raise InvalidDatasetError(f"label index {y} out of range for {len(labels)} labels")
        channel_counts = {s.n_channels for s, _ in items}
        if len(channel_counts) > 1:
            raise InvalidDatasetError(f"all series must share one channel count, got {sorted(channel_counts)}")
        if self.synthesis is not None and len(self.synthesis) != len(items):
            raise InvalidDatasetError("synthesis records must align one-to-one with items")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(
            self, "synthesis", None if self.synthesis is None else tuple(self.synthesis)
        )

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    @property
    def n_channels(self) -> int:
        if not self.items:
            raise InvalidDatasetError("empty dataset has no channel count")
        return self.items[0][0].n_channels

    @property
    def fully_observed(self) -> bool:
        return all(s.fully_observed for s, _ in self.items)

    @property
    def equal_length(self) -> bool:
        return len({s.n_steps for s, _ in self.items}) <= 1

    @property
    def common_length(self) -> int:
        lengths = {s.n_steps for s, _ in self.items}
        if len(lengths) != 1:
            raise InvalidDatasetError("series lengths differ; impute/pad first")
        return lengths.pop()

    def label_indices(self) -> np.ndarray:
        return np.array([y for _, y in self.items], dtype=np.int64)

    def to_array(self) -> np.ndarray:
        """Stack into an (N, M, T) float array. Requires equal lengths."""
        t = self.common_length
        out = np.empty((len(self.items), self.n_channels, t), dtype=np.float64)
        for i, (s, _) in enumerate(self.items):
            out[i] = s.values
        return out

    def value_equal(self, other: "LabeledDataset") -> bool:
        return (
            self.labels == other.labels
            and len(self.items) == len(other.items)
            and all(
                ya == yb and sa.value_equal(sb)
                for (sa, ya), (sb, yb) in zip(self.items, other.items)
            )
        )


def class_counts(ds: LabeledDataset) -> np.ndarray:
    """Per-label item counts, aligned with ``ds.labels``; sums to ``len(ds)``."""
    return np.bincount(ds.label_indices(), minlength=ds.n_classes).astype(np.int64)


def flatten(s: Series) -> np.ndarray:
    """Channel-major flattening: channel 0's steps, then channel 1's, ...

    The fixed layout keeps nearest-neighbour distances reproducible.
    Requires a fully observed series; inverse is :func:`unflatten`.
    """
    if not s.fully_observed:
        raise MissingDataError(f"series {s.id!r} has missing values; impute before flattening")
    return s.values.reshape(-1).copy()


def unflatten(vec: np.ndarray, n_channels: int, id: str = "") -> Series:
    """Inverse of :func:`flatten` for a known channel count."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size % n_channels != 0:
        raise InvalidSeriesError(f"cannot reshape {vec.shape} into {n_channels} channels")
    return Series(vec.reshape(n_channels, -1), None, id)


def per_channel_std(s: Series) -> np.ndarray:
    """Population standard deviation of each channel's observed values.

    Divide-by-N on purpose: the same convention feeds the dataset variance
    and the noise-scale rule, so they must agree.
    """
    out = np.empty(s.n_channels, dtype=np.float64)
    for m in range(s.n_channels):
        row = s.values[m][s.observed[m]]
        if row.size == 0:
            raise MissingDataError(f"channel {m} of series {s.id!r} is fully missing")
        out[m] = np.std(row)
    return out
