"""Experiment orchestration: augment, train, evaluate over seeds, report.

For every (dataset, augmenter, run) cell the training set is balanced to
parity with the augmenter, a fresh kernel bank is generated from the run's
seed, a ridge head is fitted on the augmented training features, and
accuracy is measured on the untouched test set. Randomness is derived
hierarchically from the base seed, so cell results are independent of
execution order. A failing cell is recorded and skipped; the sweep goes on.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmenterSpec, balance_dataset, parse_augmenter
from .core import LabeledDataset, RngStream, Series, class_counts
from .metrics import relative_gain
from .rocket import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_N_KERNELS,
    accuracy,
    generate_kernels,
    ridge_fit,
    ridge_predict,
    transform,
)
from .tsfile import ImputePolicy, header_for, impute, read_ts_file, write_ts


class BenchError(Exception):
    """Experiment-level failure (as opposed to usage or parse errors)."""


class ConfigError(Exception):
    """The experiment configuration is unusable."""


class ClassTooSmallWarning(UserWarning):
    """A class was too small for a proper stratified split; degraded gracefully."""


DEFAULT_TECHNIQUES = ("none", "noise_1", "noise_3", "noise_5", "smote", "gaussian-cov")


@dataclass(frozen=True)
class DatasetPair:
    name: str
    train_path: str
    test_path: str


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    augmenters: tuple = ()
    runs: int = 5
    seed: int = 0
    n_kernels: int = DEFAULT_N_KERNELS
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    impute_policy: ImputePolicy = ImputePolicy()
    normalize_series: bool = False
    scale_features: bool = True
    pinned_bank: bool = False
    out_dir: str | None = None
    report_format: str = "markdown"

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        augmenters = self.augmenters or tuple(parse_augmenter(t) for t in DEFAULT_TECHNIQUES)
        if "none" not in [a.kind for a in augmenters]:
            raise ConfigError("the augmenter list must include 'none' (the baseline)")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.n_kernels < 1:
            raise ConfigError("kernel count must be at least 1")
        if self.report_format not in ("markdown", "csv", "json"):
            raise ConfigError(f"unknown report format {self.report_format!r}")
        object.__setattr__(self, "augmenters", augmenters)
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))


def parse_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment; 'dataset' repeats."""
    values: dict = {"dataset": []}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
            key = key.strip().lower()
            value = value.strip()
            if key == "dataset":
                values["dataset"].append(value)
            else:
                values[key] = value
    return values


def _parse_dataset_entry(entry: str) -> DatasetPair:
    parts = entry.split()
    if len(parts) == 3:
        return DatasetPair(parts[0], parts[1], parts[2])
    if len(parts) == 2:
        return DatasetPair("", parts[0], parts[1])
    raise ConfigError(f"dataset entry must be '[name] train.ts test.ts', got {entry!r}")


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def build_config(file_values: dict | None = None, **overrides) -> ExperimentConfig:
    """Merge a parsed config file with CLI-style overrides (overrides win)."""
    values = dict(file_values or {"dataset": []})

    def take(key, default=None):
        if key in overrides and overrides[key] is not None:
            return overrides[key]
        return values.get(key, default)

    entries = list(values.get("dataset") or [])
    if overrides.get("dataset"):
        entries.extend(overrides["dataset"])
    datasets = []
    for entry in entries:
        pair = entry if isinstance(entry, DatasetPair) else _parse_dataset_entry(entry)
        if not pair.name:
            stem = str(pair.train_path).rsplit("/", 1)[-1]
            pair = replace(pair, name=stem.replace("_TRAIN.ts", "").replace(".ts", ""))
        datasets.append(pair)

    techniques = take("techniques")
    if isinstance(techniques, str):
        techniques = [t.strip() for t in techniques.split(",") if t.strip()]
    try:
        augmenters = tuple(parse_augmenter(t) for t in techniques) if techniques else ()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    alphas = take("alphas")
    if isinstance(alphas, str):
        alphas = [float(a) for a in alphas.split(",") if a.strip()]
    impute_method = take("impute", "linear")
    try:
        policy = ImputePolicy(method=impute_method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    norm = take("normalize_series", False)
    scale_feats = take("scale_features", True)
    pinned = take("pinned_bank", False)
    try:
        return ExperimentConfig(
            datasets=tuple(datasets),
            augmenters=augmenters,
            runs=int(take("runs", 5)),
            seed=int(take("seed", 0)),
            n_kernels=int(take("kernels", DEFAULT_N_KERNELS)),
            alpha_grid=tuple(alphas) if alphas else DEFAULT_ALPHA_GRID,
            impute_policy=policy,
            normalize_series=norm if isinstance(norm, bool) else _parse_bool(norm),
            scale_features=scale_feats if isinstance(scale_feats, bool) else _parse_bool(scale_feats),
            pinned_bank=pinned if isinstance(pinned, bool) else _parse_bool(pinned),
            out_dir=take("out_dir"),
            report_format=take("format", "markdown"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad configuration value: {exc}") from None


def split_stratified(ds: LabeledDataset, ratio: float, rng: RngStream):
    """Split per class as close to ``ratio`` (part_a share) as rounding allows.

    Parts are disjoint, their union is the input, and item order is
    preserved. Synthetic items (those carrying a SynthesisRecord) never
    land in part_b, so part_b stays purely original. Classes with a single
    member degrade to part_a with a ClassTooSmallWarning.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("split ratio must lie in (0, 1)")
    gen = rng.generator()
    synthesis = ds.synthesis or (None,) * len(ds.items)
    take_b: set = set()
    for ci in range(ds.n_classes):
        positions = [i for i, (_, y) in enumerate(ds.items) if y == ci]
        n = len(positions)
        if n == 0:
            continue
        if n == 1:
            warnings.warn(
                f"class {ds.labels[ci]!r} has one member; keeping it in part_a",
                ClassTooSmallWarning,
            )
            continue
        n_a = int(ratio * n + 0.5)
        n_a = min(max(n_a, 1), n - 1)
        n_b = n - n_a
        originals = [i for i in positions if synthesis[i] is None]
        if n_b > len(originals):
            warnings.warn(
                f"class {ds.labels[ci]!r} has only {len(originals)} originals for a "
                f"{n_b}-item part_b; shrinking part_b",
                ClassTooSmallWarning,
            )
            n_b = len(originals)
        order = gen.permutation(len(originals))
        take_b.update(originals[int(j)] for j in order[:n_b])

    def subset(indices):
        idx = sorted(indices)
        return LabeledDataset(
            tuple(ds.items[i] for i in idx),
            ds.labels,
            name=ds.name,
            synthesis=tuple(synthesis[i] for i in idx) if ds.synthesis is not None else None,
        )

    part_a = subset(i for i in range(len(ds.items)) if i not in take_b)
    part_b = subset(take_b)
    return part_a, part_b


@dataclass
class CellResult:
    """Outcome of one (dataset, augmenter) cell over its runs."""

    per_run: tuple = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and bool(self.per_run)

    @property
    def accuracies(self) -> tuple:
        return tuple(acc for _, acc in self.per_run)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


@dataclass
class ExperimentReport:
    dataset_names: tuple
    augmenter_names: tuple
    cells: dict
    audit: tuple = ()
    test_set_intact: dict = field(default_factory=dict)

    def cell(self, dataset: str, augmenter: str) -> CellResult:
        return self.cells[(dataset, augmenter)]

    def best_augmenter(self, dataset: str) -> str | None:
        """Best-performing non-baseline augmenter by mean accuracy."""
        if not self.cell(dataset, "none").ok:
            return None
        best_name = None
        best_mean = -np.inf
        for name in self.augmenter_names:
            if name == "none":
                continue
            cell = self.cell(dataset, name)
            if cell.ok and cell.mean > best_mean:
                best_name, best_mean = name, cell.mean
        return best_name

    def improvement_pct(self, dataset: str) -> float | None:
        """Relative gain (%, 2 decimals) of the best augmenter vs baseline."""
        best = self.best_augmenter(dataset)
        if best is None:
            return None
        baseline = self.cell(dataset, "none").mean
        gained = self.cell(dataset, best).mean
        return round(relative_gain(baseline, gained).relative_gain_pct, 2)

    def average_improvement_pct(self) -> float | None:
        gains = [g for g in (self.improvement_pct(d) for d in self.dataset_names) if g is not None]
        return round(float(np.mean(gains)), 2) if gains else None


def _normalized_dataset(ds: LabeledDataset) -> LabeledDataset:
    items = []
    for s, y in ds.items:
        mean = s.values.mean(axis=1, keepdims=True)
        std = s.values.std(axis=1, keepdims=True)
        items.append((Series((s.values - mean) / (std + 1e-8), None, s.id), y))
    return LabeledDataset(tuple(items), ds.labels, name=ds.name, synthesis=ds.synthesis)


def _dataset_digest(ds: LabeledDataset) -> str:
    return hashlib.sha256(write_ts(header_for(ds), ds).encode("utf-8")).hexdigest()


def _load_pair(pair: DatasetPair, policy: ImputePolicy, normalize: bool):
    _, train_raw = read_ts_file(pair.train_path)
    _, test_raw = read_ts_file(pair.test_path)
    if train_raw.labels != test_raw.labels:
        raise BenchError(
            f"train/test label alphabets differ: {train_raw.labels} vs {test_raw.labels}"
        )
    if policy.pad_to is None:
        joint = max(s.n_steps for part in (train_raw, test_raw) for s, _ in part.items)
        policy = ImputePolicy(policy.method, joint, policy.pad_fill, policy.truncate)
    train = impute(train_raw, policy)
    test = impute(test_raw, policy)
    if normalize:
        train = _normalized_dataset(train)
        test = _normalized_dataset(test)
    return train, test


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Run the full sweep; per-cell failures are recorded, not raised."""
    augmenter_names = tuple(a.name for a in cfg.augmenters)
    dataset_names = tuple(p.name for p in cfg.datasets)
    cells = {(d, a): CellResult() for d in dataset_names for a in augmenter_names}
    audit = []
    test_intact: dict = {}
    base = RngStream(cfg.seed)

    for pair in cfg.datasets:
        try:
            train, test = _load_pair(pair, cfg.impute_policy, cfg.normalize_series)
            test_digest = _dataset_digest(test)
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            for a in augmenter_names:
                cells[(pair.name, a)] = CellResult(error=f"dataset load failed: {exc}")
            continue

        test_labels = test.label_indices()
        ds_stream = base.child(pair.name)
        accumulated = {a: [] for a in augmenter_names}
        failed: dict = {}
        for r in range(cfg.runs):
            bank_stream = (
                ds_stream.child("kernels")
                if cfg.pinned_bank
                else ds_stream.child(f"run{r}").child("kernels")
            )
            try:
                bank = generate_kernels(
                    cfg.n_kernels, train.common_length, train.n_channels, bank_stream
                )
                test_features = transform(test, bank)
            except Exception as exc:  # noqa: BLE001
                for a in augmenter_names:
                    if a not in failed:
                        failed[a] = f"run {r}: {exc}"
                break
            for spec in cfg.augmenters:
                name = spec.name
                if name in failed:
                    continue
                try:
                    if spec.kind == "none":
                        train_aug = train
                    else:
                        cell_stream = ds_stream.child(name).child(f"run{r}")
                        train_aug = balance_dataset(train, spec.with_stream(cell_stream))
                        counts = class_counts(train_aug)
                        if not np.all(counts == counts.max()):
                            raise BenchError(f"balance invariant violated: {counts.tolist()}")
                        for rec in train_aug.synthesis or ():
                            if rec is not None:
                                audit.append((pair.name, name, r, rec))
                    features = transform(train_aug, bank)
                    model = ridge_fit(
                        features,
                        train_aug.label_indices(),
                        cfg.alpha_grid,
                        train_aug.labels,
                        scale_features=cfg.scale_features,
                    )
                    acc = accuracy(ridge_predict(model, test_features), test_labels)
                    accumulated[name].append((r, acc))
                    if progress is not None:
                        progress(pair.name, name, r, acc)
                except Exception as exc:  # noqa: BLE001
                    failed[name] = f"run {r}: {exc}"

        for a in augmenter_names:
            cells[(pair.name, a)] = CellResult(
                per_run=tuple(accumulated[a]), error=failed.get(a)
            )
        test_intact[pair.name] = _dataset_digest(test) == test_digest

    return ExperimentReport(
        dataset_names=dataset_names,
        augmenter_names=augmenter_names,
        cells=cells,
        audit=tuple(audit),
        test_set_intact=test_intact,
    )


def _cell_text(cell: CellResult) -> str:
    return f"{cell.mean:.2f}" if cell.ok else "ERR"


def report_table(report: ExperimentReport, fmt: str = "markdown") -> str:
    """Render the report: one row per dataset, one column per augmenter,
    an Improvement (%) column, and a closing Average Improvement line."""
    if fmt == "json":
        return _json_report(report)
    columns = ["Dataset", *report.augmenter_names, "Improvement (%)"]
    rows = []
    for d in report.dataset_names:
        gain = report.improvement_pct(d)
        rows.append(
            [d]
            + [_cell_text(report.cell(d, a)) for a in report.augmenter_names]
            + [f"{gain:.2f}" if gain is not None else "-"]
        )
    avg = report.average_improvement_pct()
    footer = (
        ["Average Improvement"]
        + ["-"] * len(report.augmenter_names)
        + [f"{avg:.2f}" if avg is not None else "-"]
    )
    if fmt == "markdown":
        out = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
        for row in rows + [footer]:
            out.append("| " + " | ".join(row) + " |")
        return "\n".join(out) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows + [footer]:
            writer.writerow(row)
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def _json_report(report: ExperimentReport) -> str:
    payload = {
        "augmenters": list(report.augmenter_names),
        "datasets": {},
        "average_improvement_pct": report.average_improvement_pct(),
    }
    for d in report.dataset_names:
        entry = {"cells": {}, "best": report.best_augmenter(d), "improvement_pct": report.improvement_pct(d)}
        for a in report.augmenter_names:
            cell = report.cell(d, a)
            entry["cells"][a] = {
                "mean": cell.mean if cell.ok else None,
                "std": cell.std if cell.ok else None,
                "runs": {str(r): acc for r, acc in cell.per_run},
                "error": cell.error,
            }
        payload["datasets"][d] = entry
    return json.dumps(payload, indent=2) + "\n"


def raw_accuracies_csv(report: ExperimentReport) -> str:
    """Per-cell raw accuracies, one line per successful run plus error lines."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "augmenter", "run", "accuracy", "error"])
    for d in report.dataset_names:
        for a in report.augmenter_names:
            cell = report.cell(d, a)
            for r, acc in cell.per_run:
                writer.writerow([d, a, r, repr(acc), ""])
            if cell.error is not None:
                writer.writerow([d, a, "", "", cell.error])
    return buf.getvalue()


def audit_csv(report: ExperimentReport) -> str:
    """Audit log of every synthetic series generated during the sweep."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "augmenter", "run", "series_id", "parent_ids", "technique", "parameters"])
    for dataset, augmenter, run, rec in report.audit:
        writer.writerow(
            [dataset, augmenter, run, rec.series_id, ";".join(rec.parent_ids),
             rec.technique, json.dumps(rec.parameters)]
        )
    return buf.getvalue()
