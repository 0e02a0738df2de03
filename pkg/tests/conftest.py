"""Shared builders for the test suite."""

import os
from pathlib import Path

import numpy as np
import pytest

from tsaugbench.core import LabeledDataset, Series

# Archive datasets are not bundled; tests that need them look here.
DATA_ENV = "TSAUGBENCH_DATA"


def archive_root():
    root = os.environ.get(DATA_ENV, "data")
    path = Path(root)
    return path if path.is_dir() else None


def find_archive_pair(name: str):
    """Locate <name>_TRAIN.ts / <name>_TEST.ts under the data dir, flat or nested."""
    root = archive_root()
    if root is None:
        return None
    for base in (root, root / name):
        train = base / f"{name}_TRAIN.ts"
        test = base / f"{name}_TEST.ts"
        if train.is_file() and test.is_file():
            return train, test
    return None


def random_dataset(
    gen: np.random.Generator,
    n: int,
    m: int,
    t: int,
    n_classes: int = 2,
    name: str = "rand",
    missing: float = 0.0,
    variable: bool = False,
) -> LabeledDataset:
    items = []
    for i in range(n):
        ti = int(gen.integers(max(2, t // 2), t + 1)) if variable else t
        values = gen.normal(size=(m, ti))
        observed = None
        if missing > 0.0:
            observed = gen.random((m, ti)) >= missing
            observed[:, 0] = True  # keep every channel imputable
        items.append((Series(values, observed, id=f"{name}-{i}"), int(gen.integers(n_classes))))
    # make sure every class appears
    for c in range(min(n_classes, n)):
        s, _ = items[c]
        items[c] = (s, c)
    return LabeledDataset(tuple(items), tuple(f"c{j}" for j in range(n_classes)), name=name)


def separable_dataset(
    n: int, m: int, t: int, seed: int, noise: float = 0.5, offset: float = 2.0, name: str = "sep"
) -> LabeledDataset:
    """Two classes at constant +/- offset plus Gaussian noise; linearly separable."""
    gen = np.random.default_rng(seed)
    items = []
    for i in range(n):
        y = i % 2
        base = np.full((m, t), offset if y else -offset)
        items.append((Series(base + gen.normal(0.0, noise, (m, t)), id=f"{name}-{i}"), y))
    return LabeledDataset(tuple(items), ("lo", "hi"), name=name)


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)
