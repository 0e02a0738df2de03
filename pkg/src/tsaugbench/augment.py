"""Augmentation operators and the balance-to-parity protocol.

Every operator preserves the (channels x steps) shape and the class label
of its source, is a pure function of (input, parameters, stream), and
never mutates its input. ``balance_dataset`` grows each minority class to
the majority count, appending synthetic items tagged with provenance
records.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    LabeledDataset,
    MissingDataError,
    RngStream,
    Series,
    SynthesisRecord,
    class_counts,
    flatten,
    per_channel_std,
    unflatten,
)


class AugmentError(Exception):
    """Base error for augmentation operations."""


class EmptyClassError(AugmentError):
    pass


class RatioOutOfRangeError(AugmentError):
    """A ratio/segment-count parameter is outside its valid range."""


class SingularCovarianceError(AugmentError):
    pass


AUGMENTER_KINDS = (
    "none",
    "noise",
    "smote",
    "gaussian-cov",
    "scale",
    "rotate",
    "slice",
    "permute",
    "time-mask",
    "freq-mask",
    "window-warp",
)


@dataclass(frozen=True)
class AugmenterSpec:
    """A chosen technique plus its parameters and randomness stream.

    Only the fields relevant to ``kind`` matter; the rest keep defaults.
    """

    kind: str
    level: float = 1.0
    shrinkage: float = 0.1
    factor_range: tuple = (0.8, 1.2)
    ratio: float = 0.1
    n_segments: int = 4
    window_ratio: float = 0.1
    scale_set: tuple = (0.5, 2.0)
    mask_fill: str = "zero"
    seed_stream: RngStream | None = None

    def __post_init__(self):
        if self.kind not in AUGMENTER_KINDS:
            raise ValueError(f"unknown augmenter kind {self.kind!r}")
        if self.kind == "noise" and self.level <= 0:
            raise ValueError("noise level must be positive")
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ValueError("shrinkage must lie in [0, 1]")
        lo, hi = self.factor_range
        if not 0 < lo <= hi:
            raise ValueError("factor_range must satisfy 0 < lo <= hi")
        for r in (self.ratio, self.window_ratio):
            if not 0.0 < r < 1.0:
                raise ValueError("ratios must lie in (0, 1)")
        if self.n_segments < 2:
            raise ValueError("n_segments must be at least 2")
        if not self.scale_set or any(f <= 0 for f in self.scale_set):
            raise ValueError("scale_set must be non-empty positive reals")
        if self.mask_fill not in ("zero", "mean"):
            raise ValueError("mask_fill must be 'zero' or 'mean'")
        object.__setattr__(self, "factor_range", (float(lo), float(hi)))
        object.__setattr__(self, "scale_set", tuple(float(f) for f in self.scale_set))

    @property
    def name(self) -> str:
        if self.kind == "noise":
            return f"noise_{self.level:g}"
        if self.kind == "gaussian-cov":
            return f"gaussian-cov_{self.shrinkage:g}" if self.shrinkage != 0.1 else "gaussian-cov"
        if self.kind == "slice":
            return f"slice_{self.ratio:g}"
        if self.kind == "permute":
            return f"permute_{self.n_segments}"
        if self.kind in ("time-mask", "freq-mask"):
            return f"{self.kind}_{self.ratio:g}"
        if self.kind == "scale" and self.factor_range != (0.8, 1.2):
            lo, hi = self.factor_range
            return f"scale_{lo:g}:{hi:g}"
        if self.kind == "window-warp" and self.window_ratio != 0.1:
            return f"window-warp_{self.window_ratio:g}"
        return self.kind

    def with_stream(self, stream: RngStream) -> "AugmenterSpec":
        return replace(self, seed_stream=stream)


def parse_augmenter(text: str) -> AugmenterSpec:
    """Parse a technique name like ``noise_3``, ``smote`` or ``time-mask_0.2``."""
    text = text.strip()
    base, _, arg = text.partition("_")
    try:
        if base == "noise":
            return AugmenterSpec("noise", level=float(arg) if arg else 1.0)
        if base == "gaussian-cov":
            return AugmenterSpec("gaussian-cov", shrinkage=float(arg) if arg else 0.1)
        if base == "slice":
            return AugmenterSpec("slice", ratio=float(arg) if arg else 0.9)
        if base == "permute":
            return AugmenterSpec("permute", n_segments=int(arg) if arg else 4)
        if base in ("time-mask", "freq-mask"):
            return AugmenterSpec(base, ratio=float(arg) if arg else 0.1)
        if base == "scale" and arg:
            lo, _, hi = arg.partition(":")
            return AugmenterSpec("scale", factor_range=(float(lo), float(hi)))
        if base == "window-warp" and arg:
            return AugmenterSpec("window-warp", window_ratio=float(arg))
        if not arg and base in AUGMENTER_KINDS:
            return AugmenterSpec(base)
    except ValueError as exc:
        raise ValueError(f"bad augmenter spec {text!r}: {exc}") from None
    raise ValueError(f"unknown augmenter spec {text!r}")


def _require_observed(s: Series):
    if not s.fully_observed:
        raise MissingDataError(f"series {s.id!r} has missing values; impute before augmenting")


# ---------------------------------------------------------------------------
# single-series operators
#
# Each _op returns (new values, drawn-parameters dict); the public wrapper
# packs the values into a Series. Keeping the draws visible lets
# balance_dataset write complete provenance records.


def _noise_values(s: Series, level: float, gen) -> tuple[np.ndarray, dict]:
    stds = per_channel_std(s)
    draws = gen.standard_normal(s.values.shape)
    return s.values + draws * (level * stds)[:, None], {"level": level}


def inject_noise(s: Series, level: float, rng: RngStream) -> Series:
    """Add per-channel Gaussian noise with std = level * std of that channel."""
    _require_observed(s)
    if level < 0:
        raise ValueError("noise level must be non-negative")
    values, _ = _noise_values(s, level, rng.generator())
    return s.with_values(values)


def _scale_values(s: Series, factor_range, gen) -> tuple[np.ndarray, dict]:
    lo, hi = factor_range
    factor = float(gen.uniform(lo, hi))
    return s.values * factor, {"factor": factor}


def scale(s: Series, factor_range, rng: RngStream) -> Series:
    """Multiply every channel by one factor drawn uniformly from the range."""
    _require_observed(s)
    lo, hi = factor_range
    if not 0 < lo <= hi:
        raise RatioOutOfRangeError("factor_range must satisfy 0 < lo <= hi")
    values, _ = _scale_values(s, (lo, hi), rng.generator())
    return s.with_values(values)


def _rotate_values(s: Series, gen) -> tuple[np.ndarray, dict]:
    m = s.n_channels
    if m == 1:
        sign = float(gen.integers(0, 2) * 2 - 1)
        return s.values * sign, {"sign": sign}
    a = gen.standard_normal((m, m))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    q = q * d  # Haar-uniform sign convention
    return q @ s.values, {"orthogonal": True}


def rotate(s: Series, rng: RngStream) -> Series:
    """Apply one random orthogonal channel mixing to every time step."""
    _require_observed(s)
    values, _ = _rotate_values(s, rng.generator())
    return s.with_values(values)


def _resample_rows(values: np.ndarray, new_len: int) -> np.ndarray:
    old_len = values.shape[1]
    if old_len == new_len:
        return values.copy()
    positions = np.linspace(0.0, old_len - 1.0, new_len)
    grid = np.arange(old_len, dtype=np.float64)
    return np.vstack([np.interp(positions, grid, row) for row in values])


def _window(gen, t: int, ratio: float) -> tuple[int, int]:
    width = min(t, math.ceil(ratio * t))
    start = int(gen.integers(0, t - width + 1))
    return start, width


def _slice_values(s: Series, ratio: float, gen) -> tuple[np.ndarray, dict]:
    start, width = _window(gen, s.n_steps, ratio)
    window = s.values[:, start : start + width]
    return _resample_rows(window, s.n_steps), {"start": start, "width": width}


def slice_resize(s: Series, ratio: float, rng: RngStream) -> Series:
    """Extract a random contiguous window and linearly resample to full length."""
    _require_observed(s)
    if not 0.0 < ratio <= 1.0:
        raise RatioOutOfRangeError("slice ratio must lie in (0, 1]")
    values, _ = _slice_values(s, ratio, rng.generator())
    return s.with_values(values)


def _permute_values(s: Series, n_segments: int, gen) -> tuple[np.ndarray, dict]:
    blocks = np.array_split(np.arange(s.n_steps), n_segments)
    order = gen.permutation(n_segments)
    idx = np.concatenate([blocks[i] for i in order])
    return s.values[:, idx], {"order": [int(i) for i in order]}


def permute_segments(s: Series, n_segments: int, rng: RngStream) -> Series:
    """Cut into near-equal contiguous blocks and concatenate in random order."""
    _require_observed(s)
    if not 2 <= n_segments <= s.n_steps:
        raise RatioOutOfRangeError(f"n_segments must lie in [2, {s.n_steps}]")
    values, _ = _permute_values(s, n_segments, rng.generator())
    return s.with_values(values)


def _time_mask_values(s: Series, ratio: float, gen, fill: str) -> tuple[np.ndarray, dict]:
    start, width = _window(gen, s.n_steps, ratio)
    out = s.values.copy()
    if fill == "mean":
        out[:, start : start + width] = s.values.mean(axis=1, keepdims=True)
    else:
        out[:, start : start + width] = 0.0
    return out, {"start": start, "width": width}


def time_mask(s: Series, ratio: float, rng: RngStream, fill: str = "zero") -> Series:
    """Blank one random contiguous window of ceil(ratio*T) steps in all channels."""
    _require_observed(s)
    if not 0.0 < ratio < 1.0:
        raise RatioOutOfRangeError("time-mask ratio must lie in (0, 1)")
    values, _ = _time_mask_values(s, ratio, rng.generator(), fill)
    return s.with_values(values)


def _window_warp_values(s: Series, window_ratio: float, scale_set, gen) -> tuple[np.ndarray, dict]:
    t = s.n_steps
    start, width = _window(gen, t, window_ratio)
    factor = float(scale_set[gen.integers(0, len(scale_set))])
    new_width = max(1, round(width * factor))
    warped = _resample_rows(s.values[:, start : start + width], new_width)
    stitched = np.hstack([s.values[:, :start], warped, s.values[:, start + width :]])
    return _resample_rows(stitched, t), {"start": start, "width": width, "factor": factor}


def window_warp(s: Series, window_ratio: float, scale_set, rng: RngStream) -> Series:
    """Speed one random window up or down, then resample back to full length."""
    _require_observed(s)
    if not 0.0 < window_ratio < 1.0:
        raise RatioOutOfRangeError("window ratio must lie in (0, 1)")
    if not scale_set:
        raise RatioOutOfRangeError("scale_set must be non-empty")
    values, _ = _window_warp_values(s, window_ratio, tuple(scale_set), rng.generator())
    return s.with_values(values)


def _freq_mask_values(s: Series, ratio: float, gen) -> tuple[np.ndarray, dict]:
    t = s.n_steps
    n_pos = t // 2  # positive-frequency bins 1..n_pos (Nyquist included when even)
    width = min(n_pos, math.ceil(ratio * t / 2.0))
    out = np.empty_like(s.values)
    bands = []
    residue = 0.0
    for m in range(s.n_channels):
        spectrum = np.fft.fft(s.values[m])
        if width > 0:
            start = int(gen.integers(1, n_pos - width + 2))
            spectrum[start : start + width] = 0.0
            lo, hi = t - (start + width - 1), t - start  # conjugate mirror band
            spectrum[lo : hi + 1] = 0.0
            bands.append((start, width))
        else:
            bands.append((0, 0))
        back = np.fft.ifft(spectrum)
        residue = max(residue, float(np.max(np.abs(back.imag))))
        out[m] = back.real
    return out, {"bands": bands, "imag_residue": residue}


def freq_mask(s: Series, ratio: float, rng: RngStream) -> Series:
    """Zero one random band of positive-frequency bins (and mirrors) per channel."""
    _require_observed(s)
    if not 0.0 <= ratio < 1.0:
        raise RatioOutOfRangeError("freq-mask ratio must lie in [0, 1)")
    values, params = _freq_mask_values(s, ratio, rng.generator())
    if params["imag_residue"] > 1e-9:
        raise AugmentError(f"inverse transform left imaginary residue {params['imag_residue']:g}")
    return s.with_values(values)


# ---------------------------------------------------------------------------
# class-level synthesis


def _class_members(ds: LabeledDataset, class_idx: int):
    if not 0 <= class_idx < ds.n_classes:
        raise EmptyClassError(f"class index {class_idx} out of range")
    return [s for s, y in ds.items if y == class_idx]


def smote_synthesize(
    ds: LabeledDataset, class_idx: int, count: int, rng: RngStream
) -> list:
    """Interpolate new members of one class between nearest same-class pairs.

    Each synthetic flat vector is x + lam * (nbr - x) with lam ~ U[0, 1],
    where nbr is one of x's k = min(5, n-1) nearest same-class neighbours
    (Euclidean on flattened vectors). A singleton class falls back to
    exact duplication, the only label-safe choice.

    Returns ``count`` (Series, SynthesisRecord) pairs.
    """
    members = _class_members(ds, class_idx)
    n = len(members)
    if n == 0:
        raise EmptyClassError(f"class {class_idx} has no members")
    gen = rng.generator()
    out = []
    if n == 1:
        parent = members[0]
        for j in range(count):
            rec = SynthesisRecord(
                f"{parent.id}~smote~{j}", (parent.id,), "smote", {"duplicate": True}
            )
            out.append((Series(parent.values, None, rec.series_id), rec))
        return out

    flat = np.vstack([flatten(s) for s in members])
    k = min(5, n - 1)
    d2 = np.sum((flat[:, None, :] - flat[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]

    parents = gen.integers(0, n, size=count)
    picks = gen.integers(0, k, size=count)
    lams = gen.random(size=count)
    for j in range(count):
        p = int(parents[j])
        q = int(neighbours[p, picks[j]])
        lam = float(lams[j])
        vec = flat[p] + lam * (flat[q] - flat[p])
        sid = f"{members[p].id}~smote~{j}"
        rec = SynthesisRecord(
            sid, (members[p].id, members[q].id), "smote",
            {"lambda": lam, "neighbor": members[q].id},
        )
        out.append((unflatten(vec, ds.n_channels, sid), rec))
    return out


def gaussian_cov_synthesize(
    ds: LabeledDataset, class_idx: int, count: int, shrinkage: float, rng: RngStream
) -> list:
    """Sample new class members from a shrunken Gaussian fit of the class.

    Fits the mean and population covariance S of the flattened members and
    samples from N(mu, (1-g)*S + g*diag(S)). The covariance factorisation
    is split into a rank-n data term plus the diagonal term, so sampling
    stays exact and cheap even when n << M*T.
    """
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in [0, 1]")
    members = _class_members(ds, class_idx)
    n = len(members)
    if n < 2:
        raise EmptyClassError(f"class {class_idx} has {n} member(s); covariance fit needs 2")
    flat = np.vstack([flatten(s) for s in members])
    d = flat.shape[1]
    mu = flat.mean(axis=0)
    centred = flat - mu
    if shrinkage == 0.0 and np.linalg.matrix_rank(centred) < d:
        raise SingularCovarianceError(
            "class covariance is rank-deficient; use a positive shrinkage"
        )
    diag_std = np.sqrt(np.mean(centred**2, axis=0))

    gen = rng.generator()
    g_data = gen.standard_normal((count, n))
    g_diag = gen.standard_normal((count, d))
    samples = (
        mu
        + math.sqrt((1.0 - shrinkage) / n) * (g_data @ centred)
        + math.sqrt(shrinkage) * g_diag * diag_std
    )
    parent_ids = tuple(s.id for s in members)
    base = f"{ds.name or 'ds'}~gausscov~c{class_idx}"
    out = []
    for j in range(count):
        sid = f"{base}~{j}"
        rec = SynthesisRecord(sid, parent_ids, "gaussian-cov", {"shrinkage": shrinkage})
        out.append((unflatten(samples[j], ds.n_channels, sid), rec))
    return out


def _draw_based_synthesize(
    ds: LabeledDataset, class_idx: int, count: int, spec: AugmenterSpec, rng: RngStream
) -> list:
    """Per-draw techniques: pick a random parent (with replacement), transform it."""
    members = _class_members(ds, class_idx)
    if not members:
        raise EmptyClassError(f"class {class_idx} has no members")
    gen = rng.child("parents").generator()
    parent_positions = gen.integers(0, len(members), size=count)
    out = []
    for j in range(count):
        parent = members[int(parent_positions[j])]
        draw = rng.child(f"draw-{j}").generator()
        if spec.kind == "noise":
            values, params = _noise_values(parent, spec.level, draw)
        elif spec.kind == "scale":
            values, params = _scale_values(parent, spec.factor_range, draw)
        elif spec.kind == "rotate":
            values, params = _rotate_values(parent, draw)
        elif spec.kind == "slice":
            values, params = _slice_values(parent, spec.ratio, draw)
        elif spec.kind == "permute":
            values, params = _permute_values(parent, spec.n_segments, draw)
        elif spec.kind == "time-mask":
            values, params = _time_mask_values(parent, spec.ratio, draw, spec.mask_fill)
        elif spec.kind == "freq-mask":
            values, params = _freq_mask_values(parent, spec.ratio, draw)
        elif spec.kind == "window-warp":
            values, params = _window_warp_values(parent, spec.window_ratio, spec.scale_set, draw)
        else:  # pragma: no cover - guarded by AugmenterSpec validation
            raise ValueError(f"kind {spec.kind!r} cannot synthesize")
        sid = f"{parent.id}~{spec.name}~{j}"
        out.append((Series(values, None, sid), SynthesisRecord(sid, (parent.id,), spec.name, params)))
    return out


def synthesize(
    ds: LabeledDataset, class_idx: int, count: int, spec: AugmenterSpec, rng: RngStream
) -> list:
    """``count`` synthetic (Series, SynthesisRecord) pairs for one class."""
    if spec.kind == "smote":
        return smote_synthesize(ds, class_idx, count, rng)
    if spec.kind == "gaussian-cov":
        members = _class_members(ds, class_idx)
        if len(members) == 1:
            # covariance of a singleton is undefined; duplication is the
            # only label-safe degenerate behaviour
            parent = members[0]
            out = []
            for j in range(count):
                sid = f"{parent.id}~gaussian-cov~{j}"
                rec = SynthesisRecord(sid, (parent.id,), "gaussian-cov", {"duplicate": True})
                out.append((Series(parent.values, None, sid), rec))
            return out
        return gaussian_cov_synthesize(ds, class_idx, count, spec.shrinkage, rng)
    return _draw_based_synthesize(ds, class_idx, count, spec, rng)


def balance_dataset(ds: LabeledDataset, spec: AugmenterSpec) -> LabeledDataset:
    """Augment every minority class up to the majority class count.

    Originals pass through untouched and in order; synthetic items are
    appended class by class, each carrying a SynthesisRecord. A spec of
    kind 'none' returns the dataset unchanged.
    """
    if spec.kind == "none" or not ds.items:
        return ds
    if spec.seed_stream is None:
        raise ValueError("AugmenterSpec needs a seed_stream to balance a dataset")
    if not ds.fully_observed:
        raise MissingDataError("dataset has missing values; impute before balancing")
    counts = class_counts(ds)
    target = int(counts.max())
    extra_items = []
    extra_records = []
    for ci in range(ds.n_classes):
        deficit = target - int(counts[ci])
        if deficit == 0:
            continue
        if counts[ci] == 0:
            raise EmptyClassError(f"class {ds.labels[ci]!r} has no members to synthesize from")
        class_stream = spec.seed_stream.child(f"class-{ci}")
        for series, record in synthesize(ds, ci, deficit, spec, class_stream):
            extra_items.append((series, ci))
            extra_records.append(record)
    if not extra_items:
        return ds
    synthesis = (ds.synthesis or (None,) * len(ds.items)) + tuple(extra_records)
    return LabeledDataset(
        tuple(ds.items) + tuple(extra_items), ds.labels, name=ds.name, synthesis=synthesis
    )


@dataclass(frozen=True)
class NoiseCalibration:
    """Largest label-preserving noise level per class, with fallback flags."""

    levels: tuple
    fallback: tuple


def calibrate_noise_level(
    ds: LabeledDataset, levels, trials: int, rng: RngStream
) -> NoiseCalibration:
    """Pick, per class, the largest level whose noisy samples stay in-class.

    A level qualifies when over ``trials`` noisy draws every sample's
    1-nearest-neighbour in the original training set (Euclidean, flattened)
    carries the intended class. If no level qualifies the smallest one is
    returned with its fallback flag set.
    """
    levels = tuple(float(l) for l in levels)
    if not levels or list(levels) != sorted(levels):
        raise ValueError("levels must be non-empty and sorted ascending")
    if ds.n_classes < 2:
        raise ValueError("calibration needs at least two classes")
    all_flat = np.vstack([flatten(s) for s, _ in ds.items])
    all_labels = ds.label_indices()

    chosen = []
    fallback = []
    for ci in range(ds.n_classes):
        members = _class_members(ds, ci)
        if not members:
            raise EmptyClassError(f"class {ds.labels[ci]!r} has no members")
        picked = None
        for level in reversed(levels):
            stream = rng.child(f"class-{ci}").child(f"level-{level:g}")
            gen = stream.child("parents").generator()
            parent_positions = gen.integers(0, len(members), size=trials)
            ok = True
            for t in range(trials):
                parent = members[int(parent_positions[t])]
                noisy = inject_noise(parent, level, stream.child(f"draw-{t}"))
                dists = np.linalg.norm(all_flat - flatten(noisy), axis=1)
                if all_labels[int(np.argmin(dists))] != ci:
                    ok = False
                    break
            if ok:
                picked = level
                break
        if picked is None:
            chosen.append(levels[0])
            fallback.append(True)
        else:
            chosen.append(picked)
            fallback.append(False)
    return NoiseCalibration(tuple(chosen), tuple(fallback))


def synthesis_audit_csv(ds: LabeledDataset) -> str:
    """CSV audit log of the dataset's synthetic items (empty if none)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["series_id", "parent_ids", "technique", "parameters"])
    for rec in ds.synthesis or ():
        if rec is None:
            continue
        writer.writerow(
            [rec.series_id, ";".join(rec.parent_ids), rec.technique, json.dumps(rec.parameters)]
        )
    return out.getvalue()
