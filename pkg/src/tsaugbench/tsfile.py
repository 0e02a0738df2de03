"""Reader/writer for the UEA/UCR ``.ts`` text format, plus missing-value imputation.

Grammar handled here: ``@``-prefixed header tags (case-insensitive, any
order), a ``@data`` line, then one record per line with ``:``-separated
channels, comma-separated values, ``?`` for a missing value, and -- when the
header declares class labels -- a final ``:``-field holding the label.
``%`` lines are comments; blank lines are skipped; LF and CRLF both parse.

Numeric values are written in shortest exact round-trip form, so
``parse_ts(write_ts(...))`` reproduces every value bit-for-bit.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import LabeledDataset, Series


class TsParseError(Exception):
    """Fatal parse failure; carries a 1-based line and column."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class RaggedRecordError(TsParseError):
    """Channel counts (or channel lengths within one record) disagree."""


class NonNumericValueError(TsParseError):
    """A data token is neither a number nor '?'."""


class MissingDataSectionError(TsParseError):
    """The file ended without a '@data' line."""


class UnknownTagWarning(UserWarning):
    """Header tag not recognised; preserved verbatim in extra_tags."""


class InconsistentHeaderError(Exception):
    """Dataset contents contradict the header handed to the writer."""


class AllMissingChannelError(Exception):
    """A channel has no observed value, so it cannot be imputed."""


# Standard archive tags we carry through without interpreting.
_PASSTHROUGH_TAGS = {"univariate", "missing", "timestamps", "targetlabel"}


@dataclass(frozen=True)
class TsHeader:
    """Parsed ``.ts`` header. ``series_length`` is None for variable-length files."""

    problem_name: str = ""
    dimensions: int | None = None
    series_length: int | None = None
    has_class_labels: bool = False
    class_label_names: tuple = ()
    extra_tags: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "class_label_names", tuple(self.class_label_names))
        if self.has_class_labels and not self.class_label_names:
            raise InconsistentHeaderError("class labels declared but no label names given")


def header_for(ds: LabeledDataset, equal_length: bool | None = None) -> TsHeader:
    """Canonical header describing a dataset, for (re-)serialisation."""
    if equal_length is None:
        equal_length = bool(ds.items) and ds.equal_length
    return TsHeader(
        problem_name=ds.name,
        dimensions=ds.n_channels if ds.items else None,
        series_length=ds.common_length if (ds.items and equal_length) else None,
        has_class_labels=bool(ds.labels),
        class_label_names=ds.labels,
    )


def _parse_bool(token: str, line_no: int) -> bool:
    t = token.lower()
    if t == "true":
        return True
    if t == "false":
        return False
    raise TsParseError(f"expected true/false, got {token!r}", line_no)


def _parse_positive_int(token: str, line_no: int, tag: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise TsParseError(f"@{tag} expects an integer, got {token!r}", line_no) from None
    if value < 1:
        raise TsParseError(f"@{tag} must be positive, got {value}", line_no)
    return value


def parse_ts(text) -> tuple[TsHeader, LabeledDataset]:
    """Parse a ``.ts`` character stream (string or file-like) into a dataset.

    Labels map to indices in header declaration order and are matched
    verbatim (surrounding whitespace aside). ``?`` entries become
    unobserved cells. Dimension count comes from the header or, failing
    that, the first record; later records must agree or the file is ragged.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = text.read().splitlines()

    problem_name = ""
    dimensions: int | None = None
    series_length: int | None = None
    equal_length: bool | None = None
    has_class_labels = False
    label_names: list = []
    extra: dict = {}

    data_started = False
    items = []
    expected_channels: int | None = None
    label_to_index: dict = {}

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n").strip()
        if not line or line.startswith("%"):
            continue
        if not data_started and line.startswith("@"):
            body = line[1:]
            parts = body.split(None, 1)
            tag = parts[0].lower()
            value = parts[1].strip() if len(parts) > 1 else ""
            if tag == "data":
                if value:
                    raise TsParseError("@data takes no value", line_no)
                data_started = True
                expected_channels = dimensions
                label_to_index = {name: i for i, name in enumerate(label_names)}
                continue
            if tag == "problemname":
                problem_name = value
            elif tag in ("dimension", "dimensions"):
                dimensions = _parse_positive_int(value, line_no, tag)
            elif tag == "serieslength":
                series_length = _parse_positive_int(value, line_no, tag)
            elif tag == "equallength":
                equal_length = _parse_bool(value, line_no)
            elif tag == "classlabel":
                tokens = value.split()
                if not tokens:
                    raise TsParseError("@classlabel expects true/false", line_no)
                has_class_labels = _parse_bool(tokens[0], line_no)
                label_names = tokens[1:]
                if has_class_labels and not label_names:
                    raise TsParseError("@classlabel true requires label names", line_no)
            elif tag == "timestamps" and value.lower() == "true":
                raise TsParseError("timestamped .ts records are not supported", line_no)
            elif tag in _PASSTHROUGH_TAGS:
                extra[parts[0]] = value
            else:
                warnings.warn(f"unknown header tag @{parts[0]} (line {line_no})", UnknownTagWarning)
                extra[parts[0]] = value
            continue
        if not data_started:
            raise TsParseError(f"unexpected content before @data: {line[:30]!r}", line_no)

        series, label_text = _parse_record(raw.rstrip("\r\n"), line_no, has_class_labels)
        if expected_channels is None:
            expected_channels = len(series)
        elif len(series) != expected_channels:
            raise RaggedRecordError(
                f"record has {len(series)} channels, expected {expected_channels}", line_no
            )
        if equal_length is not False and series_length is not None:
            t = len(series[0][0])
            if t != series_length:
                raise TsParseError(f"record length {t} contradicts @seriesLength {series_length}", line_no)

        if has_class_labels:
            if label_text not in label_to_index:
                raise TsParseError(f"undeclared class label {label_text!r}", line_no, col=len(raw))
            label_index = label_to_index[label_text]
        else:
            label_index = 0
        values = np.array([v for v, _ in series], dtype=np.float64)
        mask = np.array([m for _, m in series], dtype=bool)
        items.append((Series(values, mask, id=f"{problem_name or 'ts'}-{len(items)}"), label_index))

    if not data_started:
        raise MissingDataSectionError("no @data section found", len(lines) + 1 if lines else 1)

    if equal_length is False:
        series_length = None
    header = TsHeader(
        problem_name=problem_name,
        dimensions=dimensions if dimensions is not None else expected_channels,
        series_length=series_length,
        has_class_labels=has_class_labels,
        class_label_names=tuple(label_names),
        extra_tags=extra,
    )
    # Classless files still need a label alphabet for LabeledDataset's
    # invariants; a single placeholder class keeps them loadable.
    labels = tuple(label_names) if has_class_labels else ("unlabeled",)
    return header, LabeledDataset(tuple(items), labels, name=problem_name)


def _parse_record(line: str, line_no: int, has_class_labels: bool):
    """One data line -> ([(values, mask)] per channel, label text or None)."""
    fields = line.split(":")
    label_text = None
    if has_class_labels:
        if len(fields) < 2:
            raise TsParseError("record is missing its class-label field", line_no, col=len(line))
        label_text = fields[-1].strip()
        fields = fields[:-1]
    if not fields:
        raise TsParseError("record has no channels", line_no)

    channels = []
    pos = 0  # running 0-based offset of the current field in the line
    for chan_text in fields:
        values = []
        mask = []
        tok_pos = pos
        for token in chan_text.split(","):
            stripped = token.strip()
            if stripped == "?":
                values.append(math.nan)
                mask.append(False)
            else:
                try:
                    values.append(float(stripped))
                except ValueError:
                    col = tok_pos + 1 + (len(token) - len(token.lstrip()))
                    raise NonNumericValueError(f"not a number: {stripped!r}", line_no, col) from None
                else:
                    mask.append(True)
            tok_pos += len(token) + 1
        if not values:
            raise TsParseError("empty channel", line_no, pos + 1)
        channels.append((values, mask))
        pos += len(chan_text) + 1

    lengths = {len(v) for v, _ in channels}
    if len(lengths) != 1:
        raise RaggedRecordError(
            f"channel lengths differ within record: {sorted(lengths)}", line_no
        )
    return channels, label_text


def _format_value(v: float, observed: bool) -> str:
    if not observed:
        return "?"
    return repr(float(v))


def write_ts(header: TsHeader, ds: LabeledDataset) -> str:
    """Serialise a dataset under the given header; reparses value-exact."""
    if header.has_class_labels and ds.items and tuple(header.class_label_names) != ds.labels:
        raise InconsistentHeaderError(
            f"header labels {header.class_label_names} != dataset labels {ds.labels}"
        )
    if header.dimensions is not None and ds.items and header.dimensions != ds.n_channels:
        raise InconsistentHeaderError(
            f"header declares {header.dimensions} dimensions, dataset has {ds.n_channels}"
        )
    if header.series_length is not None:
        bad = [s.n_steps for s, _ in ds.items if s.n_steps != header.series_length]
        if bad:
            raise InconsistentHeaderError(
                f"header declares length {header.series_length}, found lengths {sorted(set(bad))}"
            )

    out = io.StringIO()
    out.write(f"@problemName {header.problem_name}\n")
    for tag, value in header.extra_tags.items():
        out.write(f"@{tag} {value}\n")
    if header.dimensions is not None:
        out.write(f"@dimensions {header.dimensions}\n")
    out.write(f"@equalLength {'true' if header.series_length is not None else 'false'}\n")
    if header.series_length is not None:
        out.write(f"@seriesLength {header.series_length}\n")
    if header.has_class_labels:
        out.write(f"@classLabel true {' '.join(header.class_label_names)}\n")
    else:
        out.write("@classLabel false\n")
    out.write("@data\n")
    for s, y in ds.items:
        chans = []
        for m in range(s.n_channels):
            chans.append(
                ",".join(
                    _format_value(s.values[m, t], s.observed[m, t]) for t in range(s.n_steps)
                )
            )
        record = ":".join(chans)
        if header.has_class_labels:
            record += f":{ds.labels[y]}"
        out.write(record + "\n")
    return out.getvalue()


def read_ts_file(path) -> tuple[TsHeader, LabeledDataset]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ts(fh)


def write_ts_file(path, header: TsHeader, ds: LabeledDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_ts(header, ds))


@dataclass(frozen=True)
class ImputePolicy:
    """How to fill missing values and equalise lengths.

    method: 'linear' (per-channel interpolation, edge fill at boundaries),
            'ffill' (forward fill, back-fill at the head), or 'zero'.
    pad_to: None pads every series to the longest length; an int pads to
            that fixed length (which must cover the longest series unless
            ``truncate`` is set).
    pad_fill: 'edge' replicates the endpoint value, 'zero' pads with 0.
    """

    method: str = "linear"
    pad_to: int | None = None
    pad_fill: str = "edge"
    truncate: bool = False

    def __post_init__(self):
        if self.method not in ("linear", "ffill", "zero"):
            raise ValueError(f"unknown impute method {self.method!r}")
        if self.pad_fill not in ("edge", "zero"):
            raise ValueError(f"unknown pad fill {self.pad_fill!r}")
        if self.pad_to is not None and self.pad_to < 1:
            raise ValueError("pad_to must be positive")


def _fill_channel(values: np.ndarray, observed: np.ndarray, method: str) -> np.ndarray:
    obs_idx = np.flatnonzero(observed)
    if obs_idx.size == 0:
        raise AllMissingChannelError("channel has no observed values")
    if observed.all():
        return values.copy()
    if method == "zero":
        out = values.copy()
        out[~observed] = 0.0
        return out
    if method == "linear":
        # np.interp clamps to the first/last observed value at the edges.
        return np.interp(np.arange(values.size), obs_idx, values[obs_idx])
    out = values.copy()
    last = values[obs_idx[0]]  # back-fill anything before the first observation
    for t in range(values.size):
        if observed[t]:
            last = values[t]
        else:
            out[t] = last
    return out


def impute(ds: LabeledDataset, policy: ImputePolicy | None = None) -> LabeledDataset:
    """Fully observed, equal-length copy of ``ds``; observed values untouched."""
    policy = policy or ImputePolicy()
    if not ds.items:
        return ds
    max_len = max(s.n_steps for s, _ in ds.items)
    target = policy.pad_to if policy.pad_to is not None else max_len
    if target < max_len and not policy.truncate:
        raise ValueError(
            f"pad_to={target} is shorter than the longest series ({max_len}); set truncate to allow"
        )

    new_items = []
    for s, y in ds.items:
        filled = np.empty_like(s.values)
        for m in range(s.n_channels):
            filled[m] = _fill_channel(s.values[m], s.observed[m], policy.method)
        t = filled.shape[1]
        if t > target:
            filled = filled[:, :target]
        elif t < target:
            if policy.pad_fill == "edge":
                pad = np.repeat(filled[:, -1:], target - t, axis=1)
            else:
                pad = np.zeros((filled.shape[0], target - t))
            filled = np.hstack([filled, pad])
        new_items.append((Series(filled, None, id=s.id), y))
    return LabeledDataset(tuple(new_items), ds.labels, name=ds.name, synthesis=ds.synthesis)
