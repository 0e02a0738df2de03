"""Random-convolution feature extraction and a closed-form ridge classifier.

Kernels follow the random-kernel transform recipe: lengths in {7, 9, 11},
mean-centred Gaussian weights, bias in [-1, 1], exponentially sampled
dilation, optional centred zero-padding, and a random channel subset whose
rows are summed into one response. Each kernel contributes two features
per series: the proportion of positive convolution outputs (ppv) and the
maximum output.

The classification head is one-vs-rest ridge regression with the
regularisation strength chosen by exact leave-one-out cross-validation
computed from the hat matrix in closed form.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .core import LabeledDataset, MissingDataError, RngStream, Series

KERNEL_LENGTHS = (7, 9, 11)
DEFAULT_N_KERNELS = 10_000
DEFAULT_ALPHA_GRID = tuple(np.logspace(-3, 3, 17))

BANK_FORMAT_VERSION = 1


class RocketError(Exception):
    """Base error for kernel generation, transform, and the ridge head."""


class SeriesTooShortError(RocketError):
    pass


class ChannelOutOfRangeError(RocketError):
    pass


class ShapeMismatchError(RocketError):
    pass


class WidthMismatchError(RocketError):
    pass


class SingleClassError(RocketError):
    pass


@dataclass(frozen=True)
class Kernel:
    """One convolution kernel over a channel subset."""

    length: int
    weights: np.ndarray  # (len(channel_subset), length), rows mean-centred
    bias: float
    dilation: int
    padding: int
    channel_subset: tuple


@dataclass(frozen=True)
class KernelBank:
    """A generated kernel collection, stored in flat packed arrays."""

    input_length: int
    input_channels: int
    lengths: np.ndarray
    biases: np.ndarray
    dilations: np.ndarray
    paddings: np.ndarray
    channel_counts: np.ndarray
    channel_starts: np.ndarray
    channel_indices: np.ndarray
    weight_starts: np.ndarray
    weights: np.ndarray
    seed: int = 0
    stream: str = ""

    @property
    def n_kernels(self) -> int:
        return int(self.lengths.shape[0])

    def kernel(self, i: int) -> Kernel:
        length = int(self.lengths[i])
        n_ch = int(self.channel_counts[i])
        c0 = int(self.channel_starts[i])
        w0 = int(self.weight_starts[i])
        return Kernel(
            length=length,
            weights=self.weights[w0 : w0 + n_ch * length].reshape(n_ch, length),
            bias=float(self.biases[i]),
            dilation=int(self.dilations[i]),
            padding=int(self.paddings[i]),
            channel_subset=tuple(int(c) for c in self.channel_indices[c0 : c0 + n_ch]),
        )


def generate_kernels(n: int, input_length: int, input_channels: int, rng: RngStream) -> KernelBank:
    """Draw ``n`` kernels sized for (input_channels x input_length) series.

    Per kernel: length uniform over {7, 9, 11} (restricted to lengths that
    fit the series); weights i.i.d. standard normal then centred per
    channel row; bias uniform on [-1, 1]; dilation floor(2**x) with x
    uniform on [0, log2((T-1)/(length-1))]; centred padding with
    probability 1/2; channel subset of size 2**c with c a uniform integer
    in [0, floor(log2(M))].
    """
    if n < 1:
        raise ValueError("kernel count must be positive")
    if input_channels < 1:
        raise ValueError("channel count must be positive")
    if input_length < min(KERNEL_LENGTHS):
        raise SeriesTooShortError(
            f"series length {input_length} is shorter than the smallest kernel ({min(KERNEL_LENGTHS)})"
        )
    allowed = np.array([l for l in KERNEL_LENGTHS if l <= input_length], dtype=np.int64)
    max_channel_exp = int(math.floor(math.log2(input_channels)))

    gen = rng.generator()
    lengths = np.empty(n, dtype=np.int64)
    biases = np.empty(n, dtype=np.float64)
    dilations = np.empty(n, dtype=np.int64)
    paddings = np.empty(n, dtype=np.int64)
    channel_counts = np.empty(n, dtype=np.int64)
    channel_chunks = []
    weight_chunks = []
    for i in range(n):
        length = int(allowed[gen.integers(0, len(allowed))])
        n_ch = 1 if input_channels == 1 else 2 ** int(gen.integers(0, max_channel_exp + 1))
        subset = np.sort(gen.permutation(input_channels)[:n_ch])
        w = gen.standard_normal((n_ch, length))
        w -= w.mean(axis=1, keepdims=True)
        bias = float(gen.uniform(-1.0, 1.0))
        exponent = gen.uniform(0.0, math.log2((input_length - 1) / (length - 1)))
        dilation = int(2.0**exponent)
        padding = ((length - 1) * dilation) // 2 if gen.integers(0, 2) == 1 else 0

        lengths[i] = length
        biases[i] = bias
        dilations[i] = dilation
        paddings[i] = padding
        channel_counts[i] = n_ch
        channel_chunks.append(subset.astype(np.int64))
        weight_chunks.append(w.reshape(-1))

    channel_starts = np.concatenate([[0], np.cumsum(channel_counts)[:-1]]).astype(np.int64)
    weight_sizes = channel_counts * lengths
    weight_starts = np.concatenate([[0], np.cumsum(weight_sizes)[:-1]]).astype(np.int64)
    return KernelBank(
        input_length=input_length,
        input_channels=input_channels,
        lengths=lengths,
        biases=biases,
        dilations=dilations,
        paddings=paddings,
        channel_counts=channel_counts,
        channel_starts=channel_starts,
        channel_indices=np.concatenate(channel_chunks),
        weight_starts=weight_starts,
        weights=np.concatenate(weight_chunks),
        seed=rng.seed,
        stream=rng.label,
    )


def apply_kernel(s: Series, k: Kernel) -> tuple:
    """(ppv, max) of one kernel on one series; reference scalar path.

    The convolution output at position p is
    ``bias + sum_rows sum_j weights[row, j] * x[channel_row, p + j*dilation]``
    over all zero-padded positions; out-of-range taps contribute nothing.
    """
    if not s.fully_observed:
        raise MissingDataError(f"series {s.id!r} has missing values")
    t = s.n_steps
    for ch in k.channel_subset:
        if not 0 <= ch < s.n_channels:
            raise ChannelOutOfRangeError(f"channel {ch} invalid for {s.n_channels}-channel series")
    out_len = t + 2 * k.padding - (k.length - 1) * k.dilation
    if out_len < 1:
        raise ShapeMismatchError(f"kernel span exceeds series length {t}")
    x = s.values
    end = t + k.padding - (k.length - 1) * k.dilation
    positive = 0
    best = -math.inf
    for pos in range(-k.padding, end):
        acc = k.bias
        for r, ch in enumerate(k.channel_subset):
            idx = pos
            for j in range(k.length):
                if 0 <= idx < t:
                    acc += k.weights[r, j] * x[ch, idx]
                idx += k.dilation
        if acc > best:
            best = acc
        if acc > 0.0:
            positive += 1
    return positive / out_len, best


@njit(cache=True, parallel=True)
def _apply_bank(
    x, lengths, biases, dilations, paddings, channel_counts, channel_starts,
    channel_indices, weight_starts, weights,
):  # pragma: no cover - exercised through transform()
    n = x.shape[0]
    t = x.shape[2]
    n_kernels = lengths.shape[0]
    out = np.zeros((n, 2 * n_kernels))
    for i in prange(n):
        for q in range(n_kernels):
            length = lengths[q]
            bias = biases[q]
            dilation = dilations[q]
            padding = paddings[q]
            n_ch = channel_counts[q]
            c0 = channel_starts[q]
            w0 = weight_starts[q]
            out_len = t + 2 * padding - (length - 1) * dilation
            end = t + padding - (length - 1) * dilation
            positive = 0
            best = -np.inf
            for pos in range(-padding, end):
                acc = bias
                for r in range(n_ch):
                    ch = channel_indices[c0 + r]
                    idx = pos
                    for j in range(length):
                        if 0 <= idx < t:
                            acc += weights[w0 + r * length + j] * x[i, ch, idx]
                        idx += dilation
                if acc > best:
                    best = acc
                if acc > 0.0:
                    positive += 1
            out[i, 2 * q] = positive / out_len
            out[i, 2 * q + 1] = best
    return out


def transform(ds: LabeledDataset, bank: KernelBank) -> np.ndarray:
    """Feature matrix (N, 2 * n_kernels): per-kernel (ppv, max) pairs in order."""
    if not ds.items:
        return np.zeros((0, 2 * bank.n_kernels))
    if not ds.fully_observed:
        raise MissingDataError("dataset has missing values; impute before transforming")
    if not ds.equal_length or ds.common_length != bank.input_length:
        raise ShapeMismatchError(
            f"series length must equal the bank's input length {bank.input_length}"
        )
    if ds.n_channels != bank.input_channels:
        raise ShapeMismatchError(
            f"dataset has {ds.n_channels} channels, bank expects {bank.input_channels}"
        )
    return _apply_bank(
        ds.to_array(),
        bank.lengths, bank.biases, bank.dilations, bank.paddings,
        bank.channel_counts, bank.channel_starts, bank.channel_indices,
        bank.weight_starts, bank.weights,
    )


def normalize_series_array(x: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Per-series, per-channel z-normalisation (optional preprocessing)."""
    mean = x.mean(axis=2, keepdims=True)
    std = x.std(axis=2, keepdims=True)
    return (x - mean) / (std + eps)


def save_bank(path, bank: KernelBank) -> None:
    np.savez(
        path,
        version=np.int64(BANK_FORMAT_VERSION),
        input_length=np.int64(bank.input_length),
        input_channels=np.int64(bank.input_channels),
        lengths=bank.lengths,
        biases=bank.biases,
        dilations=bank.dilations,
        paddings=bank.paddings,
        channel_counts=bank.channel_counts,
        channel_starts=bank.channel_starts,
        channel_indices=bank.channel_indices,
        weight_starts=bank.weight_starts,
        weights=bank.weights,
        seed=np.int64(bank.seed),
        stream=np.str_(bank.stream),
    )


def load_bank(path) -> KernelBank:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != BANK_FORMAT_VERSION:
            raise RocketError(f"unsupported kernel bank format version {version}")
        return KernelBank(
            input_length=int(data["input_length"]),
            input_channels=int(data["input_channels"]),
            lengths=data["lengths"],
            biases=data["biases"],
            dilations=data["dilations"],
            paddings=data["paddings"],
            channel_counts=data["channel_counts"],
            channel_starts=data["channel_starts"],
            channel_indices=data["channel_indices"],
            weight_starts=data["weight_starts"],
            weights=data["weights"],
            seed=int(data["seed"]),
            stream=str(data["stream"]),
        )


def features_csv(features: np.ndarray) -> str:
    """CSV rendering with header k0_ppv, k0_max, k1_ppv, ... (exact values)."""
    n_kernels = features.shape[1] // 2
    header = ",".join(f"k{q}_{suffix}" for q in range(n_kernels) for suffix in ("ppv", "max"))
    out = io.StringIO()
    out.write(header + "\n")
    for row in features:
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()


@dataclass(frozen=True)
class RidgeModel:
    """One-vs-rest ridge classifier with feature standardisation baked in.

    ``weights`` has shape (n_features + 1, n_classes); the last row is the
    intercept. ``loocv_errors`` aligns with ``alpha_grid``.
    """

    weights: np.ndarray
    alpha: float
    center: np.ndarray
    spread: np.ndarray
    label_names: tuple
    alpha_grid: tuple
    loocv_errors: tuple

    @property
    def n_features(self) -> int:
        return self.weights.shape[0] - 1


def ridge_fit(
    features: np.ndarray,
    labels: np.ndarray,
    alpha_grid=DEFAULT_ALPHA_GRID,
    label_names=None,
    scale_features: bool = True,
) -> RidgeModel:
    """Fit one-vs-rest ridge with LOOCV-selected regularisation.

    Features are centred and, with ``scale_features`` (the default), scaled
    per column by population std (zero-spread columns pass through).
    Centring always happens: it is what realises the unpenalised intercept.
    Targets are +/-1 per class. For each alpha the solution of
    (X'X + aI) w = X'y is evaluated by exact leave-one-out error via the
    hat-matrix identity e_i = (y_i - yhat_i) / (1 - H_ii); the alpha with
    the smallest mean squared LOO error wins (first on ties).
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"features {x.shape} do not match {y.shape[0]} labels")
    n, p = x.shape
    if n < 2:
        raise ValueError("ridge fit needs at least two rows")
    alpha_grid = tuple(float(a) for a in alpha_grid)
    if not alpha_grid or any(a <= 0 for a in alpha_grid):
        raise ValueError("alpha grid must be non-empty positive reals")
    present = np.unique(y)
    if present.size < 2:
        raise SingleClassError("training labels contain a single class")
    if label_names is None:
        label_names = tuple(str(i) for i in range(int(y.max()) + 1))
    n_classes = len(label_names)
    if int(y.max()) >= n_classes:
        raise ValueError("label index exceeds label_names")

    center = x.mean(axis=0)
    if scale_features:
        spread = x.std(axis=0)
        spread = np.where(spread > 0.0, spread, 1.0)  # constant columns pass through
    else:
        spread = np.ones(p)
    xs = (x - center) / spread
    targets = np.full((n, n_classes), -1.0)
    targets[np.arange(n), y] = 1.0
    t_mean = targets.mean(axis=0)
    tc = targets - t_mean

    # Eigendecompose on the cheaper side; both give the same hat matrix
    # H = Xs (Xs'Xs + aI)^-1 Xs' and the same primal weights.
    if p <= n:
        lam, v = np.linalg.eigh(xs.T @ xs)
        lam = np.maximum(lam, 0.0)
        basis = xs @ v  # (n, p)
        proj = basis.T @ tc  # (p, C)

        def hat_parts(alpha):
            f = 1.0 / (lam + alpha)
            h_diag = np.einsum("ij,j,ij->i", basis, f, basis)
            fitted = basis @ (f[:, None] * proj)
            return h_diag, fitted

        def solve(alpha):
            return v @ ((1.0 / (lam + alpha))[:, None] * (v.T @ (xs.T @ tc)))

    else:
        lam, q = np.linalg.eigh(xs @ xs.T)
        lam = np.maximum(lam, 0.0)
        proj = q.T @ tc  # (n, C)

        def hat_parts(alpha):
            f = lam / (lam + alpha)
            h_diag = np.einsum("ij,j,ij->i", q, f, q)
            fitted = q @ (f[:, None] * proj)
            return h_diag, fitted

        def solve(alpha):
            return xs.T @ (q @ ((1.0 / (lam + alpha))[:, None] * proj))

    errors = []
    for alpha in alpha_grid:
        h_diag, fitted = hat_parts(alpha)
        denom = np.maximum(1.0 - h_diag, 1e-12)
        loo = (tc - fitted) / denom[:, None]
        errors.append(float(np.mean(loo**2)))
    best = int(np.argmin(errors))
    alpha = alpha_grid[best]
    coef = solve(alpha)
    weights = np.vstack([coef, t_mean[None, :]])
    return RidgeModel(
        weights=weights,
        alpha=alpha,
        center=center,
        spread=spread,
        label_names=tuple(label_names),
        alpha_grid=alpha_grid,
        loocv_errors=tuple(errors),
    )


def ridge_scores(model: RidgeModel, features: np.ndarray) -> np.ndarray:
    """Per-class decision scores for each feature row."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise WidthMismatchError(
            f"features have width {x.shape[1] if x.ndim == 2 else '?'}, model expects {model.n_features}"
        )
    xs = (x - model.center) / model.spread
    return xs @ model.weights[:-1] + model.weights[-1]


def ridge_predict(model: RidgeModel, features: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties break toward the lowest class index."""
    return np.argmax(ridge_scores(model, features), axis=1)


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Percentage of matching labels, on the 0-100 scale."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise WidthMismatchError("prediction/truth length mismatch")
    if predicted.size == 0:
        raise ValueError("accuracy of zero predictions is undefined")
    return 100.0 * float(np.mean(predicted == truth))
